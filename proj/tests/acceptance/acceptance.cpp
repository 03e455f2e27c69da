// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any of them fails.
//
//   acceptance --workdir DIR [--seed N] [--data-seed N] [--reuse]
//
// --reuse keeps training outputs already present in DIR (development only).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfen/checkpoint.hpp"
#include "selfen/dataset.hpp"
#include "selfen/image.hpp"
#include "selfen/losses.hpp"
#include "selfen/model.hpp"
#include "selfen/tensor.hpp"
#include "selfen/training.hpp"
#include "suites.hpp"
#include "synthetic.hpp"

namespace fs = std::filesystem;
using namespace selfen;
using namespace selfen::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
    int criterion;
    bool pass;
    std::string detail;
};

std::vector<Verdict> g_verdicts;

void report(int criterion, bool pass, const std::string& detail) {
    g_verdicts.push_back({criterion, pass, detail});
    std::printf("criterion %d %s: %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("'") + SELFEN_CLI_PATH + "' " + args + " > " + quote(log) + " 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<ImageBuffer> load_dir(const fs::path& dir) { return load_images(scan_image_dir(dir)); }

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TraceRow {
    std::size_t epoch;
    std::string stage;
    double loss;
};

std::vector<TraceRow> read_trace(const fs::path& p) {
    std::ifstream in(p);
    std::vector<TraceRow> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string epoch, stage, loss;
        std::getline(ss, epoch, ',');
        std::getline(ss, stage, ',');
        std::getline(ss, loss, ',');
        rows.push_back({std::stoul(epoch), stage, std::stod(loss)});
    }
    return rows;
}

double mean_of(const Tensor& t) {
    double s = 0;
    for (float v : t.data()) s += v;
    return s / static_cast<double>(t.numel());
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
    const auto da = a.data();
    const auto db = b.data();
    double s = 0;
    for (std::size_t i = 0; i < da.size(); ++i) s += std::abs(static_cast<double>(da[i]) - db[i]);
    return s / static_cast<double>(da.size());
}

// mean |F_E(I) - alpha F_E(I^alpha)| over the images.
double ss_residual(const EnhanceNet& fe, const std::vector<ImageBuffer>& imgs, double alpha) {
    NoGradGuard guard;
    double s = 0;
    for (const auto& img : imgs) {
        const Tensor x = image_to_tensor(img);
        const Tensor e1 = fe(x);
        const Tensor e2 = fe(controlled_transform(x, static_cast<float>(alpha)));
        const auto d1 = e1.data();
        const auto d2 = e2.data();
        double acc = 0;
        for (std::size_t i = 0; i < d1.size(); ++i) acc += std::abs(d1[i] - alpha * d2[i]);
        s += acc / static_cast<double>(d1.size());
    }
    return s / static_cast<double>(imgs.size());
}

// Mean brightness of clamp(I^F_E(I)) over the images.
double enhanced_brightness(const EnhanceNet& fe, const std::vector<ImageBuffer>& imgs) {
    NoGradGuard guard;
    double s = 0;
    for (const auto& img : imgs) {
        const auto res = enhance_pipeline<float>(fe, nullptr, image_to_tensor(img));
        s += mean_of(res.enhanced);
    }
    return s / static_cast<double>(imgs.size());
}

double population_brightness(const std::vector<const std::vector<ImageBuffer>*>& sets) {
    double s = 0;
    std::size_t n = 0;
    for (const auto* set : sets)
        for (const auto& img : *set) {
            s += mean_value(img);
            ++n;
        }
    return s / static_cast<double>(n);
}

fs::path start_marker(const fs::path& out) { return out.parent_path() / (out.filename().string() + ".start"); }

// Seconds from the start of a training run to the last write of `file`.
double elapsed_until(const fs::path& out, const fs::path& file) {
    if (!fs::exists(start_marker(out)) || !fs::exists(file)) return 0;
    return std::chrono::duration<double>(fs::last_write_time(file) - fs::last_write_time(start_marker(out))).count();
}

std::string train_args(const fs::path& data, const fs::path& out, std::uint64_t seed, const std::string& extra) {
    return "train --lowlight-dir " + quote(data / "lowlight") + " --welllit-dir " + quote(data / "welllit") +
           " --out " + quote(out) + " --preset desk --seed " + std::to_string(seed) + " --quiet " + extra;
}

// Runs training unless `reuse` is set and `marker` already exists.
bool train(const std::string& args, const fs::path& out, const fs::path& marker, bool reuse) {
    if (reuse && fs::exists(marker)) {
        std::printf("reusing %s\n", out.string().c_str());
        return true;
    }
    fs::remove_all(out);
    fs::create_directories(out);
    std::ofstream(start_marker(out)).put('\n');
    std::printf("training: %s\n", args.c_str());
    std::fflush(stdout);
    const int rc = run_cli(args, out.parent_path() / (out.filename().string() + ".log"));
    if (rc != 0) std::printf("training exited with %d\n", rc);
    return rc == 0 && fs::exists(marker);
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& compared, std::string& diff) {
    compared = 0;
    std::vector<fs::path> names;
    for (const auto& e : fs::directory_iterator(a))
        if (e.is_regular_file()) names.push_back(e.path().filename());
    std::size_t count_b = 0;
    for (const auto& e : fs::directory_iterator(b))
        if (e.is_regular_file()) ++count_b;
    if (count_b != names.size()) {
        diff = "file counts differ";
        return false;
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) {
        if (!fs::exists(b / n) || read_bytes(a / n) != read_bytes(b / n)) {
            diff = n.string();
            return false;
        }
        ++compared;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance"};
    fs::path workdir;
    std::uint64_t seed = 7;
    std::uint64_t data_seed = 2024;
    bool reuse = false;
    app.add_option("--workdir", workdir)->required();
    app.add_option("--seed", seed);
    app.add_option("--data-seed", data_seed);
    app.add_flag("--reuse", reuse);
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(workdir);
    workdir = fs::absolute(workdir);
    const LossWeights weights;

    // 1: gradient checks over five seeds.
    {
        const auto t0 = Clock::now();
        const auto suite = gradient_suite(5);
        const double secs = seconds_since(t0);
        double worst = 0;
        std::string worst_name;
        bool all_checked = true;
        std::size_t probes = 0;
        for (const auto& e : suite) {
            probes += e.report.checked;
            if (e.report.checked == 0) all_checked = false;
            if (e.report.max_rel > worst || !(e.report.max_rel == e.report.max_rel)) {
                worst = e.report.max_rel;
                worst_name = e.name + " seed " + std::to_string(e.seed) + " " + e.report.worst;
            }
        }
        const bool pass = all_checked && worst < 1e-5 && secs < 120.0;
        report(1, pass,
               std::to_string(suite.size()) + " checks, " + std::to_string(probes) + " probes, max rel err " +
                   fmt("%.3g", worst) + " (" + worst_name + "), " + fmt("%.1f", secs) + " s (limit 120 s)");
    }

    // 2: loss oracles.
    {
        std::size_t failed = 0;
        for (const auto& c : loss_oracle_cases())
            if (!c.pass()) {
                ++failed;
                std::printf("  loss oracle %s: got %.10g expected %.10g tol %.3g\n", c.name.c_str(), c.value,
                            c.expected, c.tol);
            }
        report(2, failed == 0, std::to_string(loss_oracle_cases().size()) + " loss oracles, " +
                                   std::to_string(failed) + " failed");
    }

    // 5: metric oracles (cheap, so run before training).
    std::string metric_detail;
    bool metric_pass = true;
    {
        std::size_t failed = 0;
        const auto cases = metric_oracle_cases();
        for (const auto& c : cases)
            if (!c.pass()) {
                ++failed;
                std::printf("  metric oracle %s: got %.10g expected %.10g tol %.3g\n", c.name.c_str(), c.value,
                            c.expected, c.tol);
            }
        metric_pass = failed == 0;
        metric_detail = std::to_string(cases.size()) + " metric oracles, " + std::to_string(failed) + " failed";
    }

    // Synthetic data.
    const fs::path data = workdir / "data";
    if (!(reuse && fs::exists(data / "welllit_test"))) {
        fs::remove_all(data);
        write_synthetic_set(make_synthetic_set(data_seed, 64, 16), data);
    }
    const auto welllit_train = load_dir(data / "welllit");
    const auto welllit_test = load_dir(data / "welllit_test");
    const auto lowlight_test = load_dir(data / "lowlight_test");
    const double target = population_brightness({&welllit_train, &welllit_test});

    // Run A.
    const fs::path run_a = workdir / "run_a";
    const bool ok_a = train(train_args(data, run_a, seed, "--stage both"), run_a, run_a / "denoise.ckpt", reuse);
    double brightness_err_full = 1e9;

    if (!ok_a) {
        report(3, false, "run A training failed");
        report(4, false, "run A training failed");
    } else {
        const EnhanceNet fe = enhance_net_from(load_checkpoint(run_a / "enhance.ckpt"));
        const EnhanceNet fe0(EnhanceNetConfig{}, enhance_init_seed(seed));

        double wsc = 0;
        {
            NoGradGuard guard;
            for (const auto& w : welllit_test) {
                const Tensor eta = fe(image_to_tensor(w));
                double s = 0;
                for (float v : eta.data()) s += std::abs(v - 1.0);
                wsc += s / static_cast<double>(eta.numel());
            }
            wsc /= static_cast<double>(welllit_test.size());
        }
        const double bright = enhanced_brightness(fe, lowlight_test);
        brightness_err_full = std::abs(bright - target) / target;
        const double r0 = ss_residual(fe0, lowlight_test, weights.alpha);
        const double r1 = ss_residual(fe, lowlight_test, weights.alpha);

        const auto trace = read_trace(run_a / "trace.csv");
        std::string loss_detail = "trace unavailable";
        {
            std::vector<double> losses;
            for (const auto& row : trace)
                if (row.stage == "enhance") losses.push_back(row.loss);
            if (!losses.empty())
                loss_detail = "epoch loss " + fmt("%.4g", losses.front()) + " -> " + fmt("%.4g", losses.back());
        }
        const double stage1_secs = elapsed_until(run_a, run_a / "enhance.ckpt");

        const bool a = wsc < 0.15;
        const bool b = brightness_err_full <= 0.20;
        const bool c = r1 * 5.0 <= r0;
        report(3, a && b && c,
               "(a) mean |F_E(W)-1| " + fmt("%.4f", wsc) + " (< 0.15); (b) enhanced brightness " + fmt("%.4f", bright) +
                   " vs well-lit " + fmt("%.4f", target) + ", rel err " + fmt("%.3f", brightness_err_full) +
                   " (<= 0.20); (c) residual " + fmt("%.4g", r0) + " -> " + fmt("%.4g", r1) + ", ratio " +
                   fmt("%.2f", r1 > 0 ? r0 / r1 : 1e9) + " (>= 5); " + loss_detail +
                   "; stage-1 wall time " + fmt("%.1f", stage1_secs / 60.0) + " min (target < 15 min on a desktop CPU)" +
                   "; run A total " + fmt("%.1f", elapsed_until(run_a, run_a / "denoise.ckpt") / 60.0) + " min");

        const Checkpoint ck_d = load_checkpoint(run_a / "denoise.ckpt");
        const EnhanceNet fe_d = enhance_net_from(ck_d);
        const auto fd = denoise_net_from(ck_d);
        if (!fd) {
            report(4, false, "denoise.ckpt has no F_D");
        } else {
            NoGradGuard guard;
            double fid = 0;
            for (const auto& w : welllit_test) {
                const Tensor x = image_to_tensor(w);
                const auto res = enhance_pipeline<float>(fe_d, &*fd, x);
                fid += mean_abs_diff(res.denoised, x);
            }
            fid /= static_cast<double>(welllit_test.size());
            std::size_t smoother = 0;
            for (const auto& img : lowlight_test) {
                const Tensor x = image_to_tensor(img);
                const auto res = enhance_pipeline<float>(fe_d, &*fd, x);
                if (loss_g<float>(res.denoised).data()[0] < loss_g<float>(x).data()[0]) ++smoother;
            }
            const double frac = static_cast<double>(smoother) / static_cast<double>(lowlight_test.size());
            const auto sum_e = parameter_checksum(fe.named_parameters());
            const auto sum_d = parameter_checksum(fe_d.named_parameters());
            char sums[80];
            std::snprintf(sums, sizeof(sums), "%016llx vs %016llx", static_cast<unsigned long long>(sum_e),
                          static_cast<unsigned long long>(sum_d));
            report(4, fid < 0.02 && frac >= 0.9 && sum_e == sum_d,
                   "(d) mean |F_D(W)-W| " + fmt("%.4f", fid) + " (< 0.02); (e) L_G reduced on " +
                       std::to_string(smoother) + "/" + std::to_string(lowlight_test.size()) + " (>= 90%); (f) F_E checksum " +
                       sums);
        }
    }

    report(5, metric_pass, metric_detail);

    // 6: run B with identical arguments.
    {
        const fs::path run_b = workdir / "run_b";
        const bool ok_b =
            ok_a && train(train_args(data, run_b, seed, "--stage both"), run_b, run_b / "denoise.ckpt", reuse);
        if (!ok_b) {
            report(6, false, "run B training failed");
        } else {
            std::size_t ck_count = 0, img_count = 0;
            std::string diff;
            bool same = same_tree(run_a, run_b, ck_count, diff);
            const fs::path enh_a = workdir / "enhanced_a";
            const fs::path enh_b = workdir / "enhanced_b";
            if (same) {
                fs::remove_all(enh_a);
                fs::remove_all(enh_b);
                const auto enh = [&](const fs::path& run, const fs::path& out) {
                    return run_cli("enhance --checkpoint " + quote(run / "denoise.ckpt") + " --input " +
                                       quote(data / "lowlight_test") + " --output " + quote(out),
                                   out.string() + ".log");
                };
                if (enh(run_a, enh_a) != 0 || enh(run_b, enh_b) != 0) {
                    same = false;
                    diff = "enhance command failed";
                } else {
                    same = same_tree(enh_a, enh_b, img_count, diff) && img_count == lowlight_test.size();
                }
            }
            report(6, same,
                   same ? std::to_string(ck_count) + " checkpoint files and " + std::to_string(img_count) +
                              " enhanced images byte-identical"
                        : "mismatch: " + diff);
        }
    }

    // 7: stage-1 ablation without the self-supervision loss.
    {
        const fs::path run_c = workdir / "run_no_ss";
        const bool ok_c = train(train_args(data, run_c, seed, "--stage enhance --no-loss-ss"), run_c,
                                run_c / "enhance.ckpt", reuse);
        if (!ok_c || !ok_a) {
            report(7, false, "ablation training failed");
        } else {
            const EnhanceNet fe = enhance_net_from(load_checkpoint(run_c / "enhance.ckpt"));
            const double bright = enhanced_brightness(fe, lowlight_test);
            const double err = std::abs(bright - target) / target;
            report(7, err > brightness_err_full + 0.01,
                   "brightness rel err without self-supervision " + fmt("%.3f", err) + " vs full " +
                       fmt("%.3f", brightness_err_full) + " (must exceed by > 0.01)");
        }
    }

    bool all = true;
    for (const auto& v : g_verdicts) all = all && v.pass;
    std::printf("%s\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
    return all ? 0 : 1;
}
