#include "selfen/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include "selfen/checkpoint.hpp"
#include "selfen/dataset.hpp"
#include "selfen/error.hpp"
#include "selfen/metrics.hpp"
#include "selfen/model.hpp"
#include "selfen/ops.hpp"
#include "selfen/training.hpp"

namespace selfen {

namespace fs = std::filesystem;

namespace {

// Missing flag combinations detected after parsing; mapped to exit code 2.
class UsageError : public Error {
 public:
    using Error::Error;
};

const std::map<std::string, FeedbackMode> kFeedbackModes = {
    {"features", FeedbackMode::kFeatures}, {"input", FeedbackMode::kInput}, {"none", FeedbackMode::kNone}};
const std::map<std::string, EtaMode> kEtaModes = {
    {"features", EtaMode::kFeatures}, {"input", EtaMode::kInput}, {"none", EtaMode::kNone}};

struct TrainArgs {
    std::string lowlight_dir;
    std::string welllit_dir;
    std::string stage = "both";
    std::string preset = "paper";
    std::uint64_t seed = 0;
    std::string out;
    std::optional<std::size_t> epochs, updates, batch, patch, half_every, ckpt_every;
    std::optional<double> lr;
    bool no_ss = false, no_sc = false, no_wsc = false, no_g = false, no_f = false, no_dsc = false;
    std::optional<double> alpha, c1, c2, c3, c4, delta;
    std::optional<std::size_t> feedback_count;
    std::string feedback_mode = "features";
    std::string eta_mode = "features";
    bool no_detach_eta = false;
    std::string enhance_ckpt;
    bool quiet = false;
};

struct EnhanceArgs {
    std::string checkpoint;
    std::string input;
    std::string output;
    std::string dump_eta;
    bool no_denoise = false;
    std::optional<std::size_t> feedback_count;
};

struct EvalArgs {
    std::string pred_dir;
    std::string gt_dir;
    std::string input_dir;
    std::string out;
};

TrainConfig build_train_config(const TrainArgs& a) {
    auto cfg = a.preset == "desk" ? TrainConfig::desk() : TrainConfig::paper();
    cfg.rng_seed = a.seed;
    if (a.epochs) cfg.epochs = *a.epochs;
    if (a.updates) cfg.updates_per_epoch = *a.updates;
    if (a.batch) cfg.batch_size = *a.batch;
    if (a.patch) cfg.patch_size = *a.patch;
    if (a.half_every) cfg.lr_half_every = *a.half_every;
    if (a.ckpt_every) cfg.checkpoint_every = *a.ckpt_every;
    if (a.lr) cfg.lr_initial = *a.lr;
    auto& w = cfg.weights;
    w.use_ss = !a.no_ss;
    w.use_sc = !a.no_sc;
    w.use_wsc = !a.no_wsc;
    w.use_g = !a.no_g;
    w.use_f = !a.no_f;
    w.use_dsc = !a.no_dsc;
    if (a.alpha) w.alpha = *a.alpha;
    if (a.c1) w.c1 = *a.c1;
    if (a.c2) w.c2 = *a.c2;
    if (a.c3) w.c3 = *a.c3;
    if (a.c4) w.c4 = *a.c4;
    if (a.delta) w.delta = *a.delta;
    w.detach_eta = !a.no_detach_eta;
    cfg.validate();
    if (a.stage != "denoise" && !w.use_ss && !w.use_sc && !w.use_wsc)
        throw ConfigError("every enhancement loss is disabled");
    if (a.stage != "enhance" && !w.use_f && !w.use_g && !w.use_dsc)
        throw ConfigError("every denoising loss is disabled");
    if (a.stage == "denoise" && a.enhance_ckpt.empty())
        throw UsageError("--stage denoise requires --enhance-ckpt");
    return cfg;
}

std::string epoch_tag(std::size_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu", epoch);
    return buf;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    auto cfg = build_train_config(a);
    EnhanceNetConfig fe_cfg;
    fe_cfg.feedback_mode = kFeedbackModes.at(a.feedback_mode);
    if (a.feedback_count) fe_cfg.feedback_count = *a.feedback_count;
    if (fe_cfg.feedback_mode == FeedbackMode::kNone) fe_cfg.feedback_count = 0;
    DenoiseNetConfig fd_cfg;
    fd_cfg.eta_mode = kEtaModes.at(a.eta_mode);

    const fs::path out_dir(a.out);
    const auto dataset = scan_unpaired_dirs(a.lowlight_dir, a.welllit_dir);
    if (!a.quiet)
        out << "dataset lowlight=" << dataset.lowlight.size() << " welllit=" << dataset.welllit.size() << std::endl;
    const auto pools = load_pools(dataset);
    fs::create_directories(out_dir);

    std::ofstream trace(out_dir / "trace.csv", std::ios::trunc);
    if (!trace) throw IoError("cannot write '" + (out_dir / "trace.csv").string() + "'");
    trace << "epoch,stage,loss,lr\n";
    auto on_epoch = [&](const EpochRecord& rec) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%zu,%s,%.10g,%.10g\n", rec.epoch, stage_name(rec.stage), rec.loss, rec.lr);
        trace << buf << std::flush;
        if (!a.quiet) out << format_progress(rec) << std::endl;
    };
    CheckpointMeta meta{0, cfg.rng_seed, cfg.hash()};

    std::optional<EnhanceNet> fe;
    if (a.stage == "denoise") {
        fe.emplace(enhance_net_from(load_checkpoint(a.enhance_ckpt)));
    } else {
        fe.emplace(fe_cfg, enhance_init_seed(cfg.rng_seed));
        cfg.stage = TrainStage::kEnhance;
        TrainHooks hooks;
        hooks.on_epoch = on_epoch;
        hooks.on_checkpoint = [&](std::size_t epoch) {
            meta.epoch = epoch;
            save_checkpoint(out_dir / ("enhance_e" + epoch_tag(epoch) + ".ckpt"), make_checkpoint(&*fe, nullptr, meta));
        };
        train_stage_enhance(*fe, pools, cfg, hooks);
        meta.epoch = cfg.epochs;
        save_checkpoint(out_dir / "enhance.ckpt", make_checkpoint(&*fe, nullptr, meta));
    }
    if (a.stage != "enhance") {
        DenoiseNet fd(fd_cfg, denoise_init_seed(cfg.rng_seed));
        cfg.stage = TrainStage::kDenoise;
        TrainHooks hooks;
        hooks.on_epoch = on_epoch;
        hooks.on_checkpoint = [&](std::size_t epoch) {
            meta.epoch = epoch;
            save_checkpoint(out_dir / ("denoise_e" + epoch_tag(epoch) + ".ckpt"), make_checkpoint(&*fe, &fd, meta));
        };
        train_stage_denoise(fd, *fe, pools, cfg, hooks);
        meta.epoch = cfg.epochs;
        save_checkpoint(out_dir / "denoise.ckpt", make_checkpoint(&*fe, &fd, meta));
    }
    return 0;
}

std::vector<float> map_values(const Tensor& eta) {
    const auto d = eta.data();
    return {d.begin(), d.end()};
}

int cmd_enhance(const EnhanceArgs& a, std::ostream& out, std::ostream& err) {
    const auto ckpt = load_checkpoint(a.checkpoint);
    auto fe = enhance_net_from(ckpt);
    if (a.feedback_count) {
        if (fe.config().feedback_mode == FeedbackMode::kNone && *a.feedback_count > 0)
            throw ConfigError("checkpoint was trained without feedback; --feedback-count must be 0");
        fe.set_feedback_count(*a.feedback_count);
    }
    std::optional<DenoiseNet> fd;
    if (!a.no_denoise) {
        fd = denoise_net_from(ckpt);
        if (!fd) err << "note: checkpoint has no denoising network; enhancing without it" << std::endl;
    }

    const fs::path input(a.input);
    std::vector<fs::path> inputs;
    fs::path out_dir;
    bool to_dir = false;
    if (fs::is_directory(input)) {
        inputs = scan_image_dir(input);
        out_dir = a.output;
        to_dir = true;
    } else {
        if (!fs::exists(input)) throw IoError("input '" + a.input + "' does not exist");
        inputs.push_back(input);
        to_dir = fs::is_directory(a.output);
        out_dir = to_dir ? fs::path(a.output) : fs::path(a.output).parent_path();
    }
    if (!out_dir.empty()) fs::create_directories(out_dir);
    if (!a.dump_eta.empty()) fs::create_directories(a.dump_eta);

    NoGradGuard guard;
    for (const auto& path : inputs) {
        const auto img = load_image(path);
        const auto res = enhance_pipeline(fe, fd ? &*fd : nullptr, image_to_tensor(img));
        auto enhanced = tensor_to_image(res.enhanced);
        const fs::path dst = to_dir ? out_dir / path.filename().replace_extension(".png") : fs::path(a.output);
        save_image(dst, enhanced);
        if (!a.dump_eta.empty()) {
            auto name = path.stem().string() + "_eta.png";
            save_gray_image(fs::path(a.dump_eta) / name, map_values(res.eta.values), img.width, img.height);
        }
        out << path.filename().string() << " -> " << dst.string() << std::endl;
    }
    return 0;
}

std::map<std::string, fs::path> by_name(const std::vector<fs::path>& paths) {
    std::map<std::string, fs::path> m;
    for (const auto& p : paths) m[p.filename().string()] = p;
    return m;
}

void check_matching(const std::map<std::string, fs::path>& pred, const std::map<std::string, fs::path>& other,
                    const std::string& other_name) {
    std::string missing;
    for (const auto& [name, _] : pred)
        if (!other.count(name)) missing += " " + name + " (no " + other_name + ")";
    for (const auto& [name, _] : other)
        if (!pred.count(name)) missing += " " + name + " (no prediction)";
    if (!missing.empty()) throw DataError("unmatched files:" + missing);
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.gt_dir.empty() && a.input_dir.empty()) throw UsageError("eval needs --gt-dir and/or --input-dir");
    const auto pred = by_name(scan_image_dir(a.pred_dir));
    std::map<std::string, fs::path> gt, orig;
    if (!a.gt_dir.empty()) {
        gt = by_name(scan_image_dir(a.gt_dir));
        check_matching(pred, gt, "ground truth");
    }
    if (!a.input_dir.empty()) {
        orig = by_name(scan_image_dir(a.input_dir));
        check_matching(pred, orig, "input");
    }
    MetricReport report;
    for (const auto& [name, path] : pred) {
        const auto p = load_image(path);
        MetricRow row;
        row.image = name;
        if (!gt.empty()) {
            const auto g = load_image(gt.at(name));
            row.psnr = psnr(p, g);
            row.ssim = ssim(p, g);
            row.ciede2000 = ciede2000(p, g);
        }
        if (!orig.empty()) row.loe = loe(load_image(orig.at(name)), p);
        report.rows.push_back(row);
    }
    if (a.out.empty()) {
        report.write_csv(out);
    } else {
        const fs::path dst(a.out);
        if (dst.has_parent_path()) fs::create_directories(dst.parent_path());
        std::ofstream csv(dst, std::ios::trunc);
        if (!csv) throw IoError("cannot write '" + a.out + "'");
        report.write_csv(csv);
        std::ofstream meta(fs::path(a.out + ".meta.json"), std::ios::trunc);
        meta << report.metadata_json() << '\n';
        out << "wrote " << a.out << std::endl;
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Unpaired low-light image enhancement: training, inference and evaluation"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train the enhancement and/or denoising network");
    train->add_option("--lowlight-dir", ta.lowlight_dir, "Directory of low-light training images")->required();
    train->add_option("--welllit-dir", ta.welllit_dir, "Directory of well-lit training images")->required();
    train->add_option("--out", ta.out, "Output directory for checkpoints and trace.csv")->required();
    train->add_option("--stage", ta.stage, "Stage(s) to run")
        ->check(CLI::IsMember({"enhance", "denoise", "both"}))
        ->capture_default_str();
    train->add_option("--preset", ta.preset, "Schedule preset: paper (250/1000/128/4) or desk (20/100/64/4)")
        ->check(CLI::IsMember({"paper", "desk"}))
        ->capture_default_str();
    train->add_option("--seed", ta.seed, "RNG seed")->capture_default_str();
    train->add_option("--epochs", ta.epochs, "Override epoch count")->check(CLI::PositiveNumber);
    train->add_option("--updates-per-epoch", ta.updates, "Override updates per epoch")->check(CLI::NonNegativeNumber);
    train->add_option("--batch-size", ta.batch, "Override batch size")->check(CLI::PositiveNumber);
    train->add_option("--patch-size", ta.patch, "Override square patch side")->check(CLI::Range(2, 1 << 16));
    train->add_option("--lr", ta.lr, "Override initial learning rate")->check(CLI::PositiveNumber);
    train->add_option("--lr-half-every", ta.half_every, "Halve the learning rate every N epochs")
        ->check(CLI::PositiveNumber);
    train->add_option("--checkpoint-every", ta.ckpt_every, "Periodic checkpoint interval in epochs (0 = off)")
        ->check(CLI::NonNegativeNumber);
    train->add_flag("--no-loss-ss", ta.no_ss, "Disable the self-supervision loss");
    train->add_flag("--no-loss-sc", ta.no_sc, "Disable the self-conditioning loss on enhanced low-light inputs");
    train->add_flag("--no-loss-wsc", ta.no_wsc, "Disable the well-lit self-conditioning loss");
    train->add_flag("--no-loss-g", ta.no_g, "Disable the weighted gradient loss");
    train->add_flag("--no-loss-f", ta.no_f, "Disable the fidelity loss");
    train->add_flag("--no-loss-dsc", ta.no_dsc, "Disable the denoising self-conditioning loss");
    train->add_option("--alpha", ta.alpha, "Controlled transformation exponent, in (0,1)");
    train->add_option("--c1", ta.c1, "Weight of the self-conditioning loss");
    train->add_option("--c2", ta.c2, "Weight of the well-lit self-conditioning loss");
    train->add_option("--c3", ta.c3, "Weight of the gradient loss inside the low-light term");
    train->add_option("--c4", ta.c4, "Weight of the low-light denoising term");
    train->add_option("--delta", ta.delta, "Exponent of the gradient weights");
    train->add_option("--feedback-count", ta.feedback_count, "Feedback passes after the initial one")
        ->check(CLI::NonNegativeNumber);
    train->add_option("--feedback-mode", ta.feedback_mode, "How the previous map re-enters F_E")
        ->check(CLI::IsMember({"features", "input", "none"}))
        ->capture_default_str();
    train->add_option("--eta-mode", ta.eta_mode, "How the map enters F_D")
        ->check(CLI::IsMember({"features", "input", "none"}))
        ->capture_default_str();
    train->add_flag("--no-detach-eta", ta.no_detach_eta, "Backpropagate through the map when forming I^eta");
    train->add_option("--enhance-ckpt", ta.enhance_ckpt, "Trained enhancement checkpoint (for --stage denoise)");
    train->add_flag("--quiet", ta.quiet, "Suppress progress lines");

    EnhanceArgs ea;
    auto* enhance = app.add_subcommand("enhance", "Enhance whole images with a trained checkpoint");
    enhance->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
    enhance->add_option("--input", ea.input, "Input image or directory")->required();
    enhance->add_option("--output", ea.output, "Output PNG (single input) or directory")->required();
    enhance->add_option("--dump-eta", ea.dump_eta, "Directory for grayscale enhancement maps");
    enhance->add_flag("--no-denoise", ea.no_denoise, "Skip F_D even if the checkpoint has it");
    enhance->add_option("--feedback-count", ea.feedback_count, "Override feedback passes")
        ->check(CLI::NonNegativeNumber);

    EvalArgs va;
    auto* eval = app.add_subcommand("eval", "Compute PSNR/SSIM/CIEDE2000 and LOE over a directory");
    eval->add_option("--pred-dir", va.pred_dir, "Enhanced images")->required();
    eval->add_option("--gt-dir", va.gt_dir, "Ground-truth images (PSNR, SSIM, CIEDE2000)");
    eval->add_option("--input-dir", va.input_dir, "Original inputs (LOE)");
    eval->add_option("--out", va.out, "CSV report path (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage" << std::endl;
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(ta, out);
        if (enhance->parsed()) return cmd_enhance(ea, out, err);
        if (eval->parsed()) return cmd_eval(va, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}

}  // namespace selfen
