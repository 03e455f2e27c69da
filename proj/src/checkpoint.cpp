#include "selfen/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>

#include "selfen/error.hpp"

namespace selfen {

namespace {

constexpr char kMagicPrefix[3] = {'S', 'E', 'N'};

class Writer {
 public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }
    std::span<const std::uint8_t> view() const { return bytes_; }

 private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32() {
        const auto* p = need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* p = need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        const auto* p = need(n);
        return std::string(reinterpret_cast<const char*>(p), n);
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
    const std::uint8_t* need(std::size_t n) {
        if (remaining() < n) throw CorruptFileError("checkpoint truncated");
        const auto* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

const ParameterRecord& require(const Checkpoint& ckpt, const std::string& name) {
    const auto* r = ckpt.find(name);
    if (r == nullptr) throw FormatError("checkpoint is missing parameter '" + name + "'");
    return *r;
}

std::size_t count_blocks(const Checkpoint& ckpt, const std::string& prefix) {
    std::size_t n = 0;
    while (ckpt.find(prefix + std::to_string(n) + ".conv1.weight") != nullptr) ++n;
    return n;
}

}  // namespace

const ParameterRecord* Checkpoint::find(const std::string& name) const {
    for (const auto& r : params)
        if (r.name == name) return &r;
    return nullptr;
}

bool Checkpoint::has_enhance() const { return find("fe.input.weight") != nullptr; }
bool Checkpoint::has_denoise() const { return find("fd.input.weight") != nullptr; }

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.raw("SEN1", 4);
    w.u32(kCheckpointVersion);
    w.u8(static_cast<std::uint8_t>(ckpt.stage));
    w.u8(static_cast<std::uint8_t>(ckpt.feedback_mode));
    w.u8(static_cast<std::uint8_t>(ckpt.eta_mode));
    w.u8(0);
    w.u32(ckpt.feedback_count);
    w.u64(ckpt.epoch);
    w.u64(ckpt.rng_seed);
    w.u64(ckpt.config_hash);
    w.u32(static_cast<std::uint32_t>(ckpt.params.size()));
    for (const auto& r : ckpt.params) {
        if (shape_numel(r.shape) != r.values.size())
            throw ShapeError("checkpoint record '" + r.name + "' has inconsistent shape");
        w.u32(static_cast<std::uint32_t>(r.name.size()));
        w.raw(r.name.data(), r.name.size());
        w.u32(static_cast<std::uint32_t>(r.shape.size()));
        for (auto d : r.shape) w.u32(static_cast<std::uint32_t>(d));
        for (auto v : r.values) w.f32(v);
    }
    w.u64(fnv1a64(w.view()));
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagicPrefix, 3) != 0)
        throw CorruptFileError("not a checkpoint file (bad magic)");
    if (bytes[3] != '1')
        throw VersionError(std::string("unsupported checkpoint format 'SEN") + static_cast<char>(bytes[3]) + "'");
    if (bytes.size() < 12) throw CorruptFileError("checkpoint truncated");
    const auto body = bytes.first(bytes.size() - 8);
    Reader tail(bytes.last(8));
    if (fnv1a64(body) != tail.u64()) throw CorruptFileError("checkpoint checksum mismatch");

    Reader r(body);
    r.str(4);
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    Checkpoint ckpt;
    const auto stage = r.u8();
    const auto fb = r.u8();
    const auto eta = r.u8();
    r.u8();
    if (stage > 2 || fb > 2 || eta > 2) throw CorruptFileError("checkpoint header has invalid enum values");
    ckpt.stage = static_cast<CheckpointStage>(stage);
    ckpt.feedback_mode = static_cast<FeedbackMode>(fb);
    ckpt.eta_mode = static_cast<EtaMode>(eta);
    ckpt.feedback_count = r.u32();
    ckpt.epoch = r.u64();
    ckpt.rng_seed = r.u64();
    ckpt.config_hash = r.u64();
    const auto count = r.u32();
    std::set<std::string> seen;
    for (std::uint32_t i = 0; i < count; ++i) {
        ParameterRecord rec;
        rec.name = r.str(r.u32());
        if (!seen.insert(rec.name).second) throw CorruptFileError("duplicate checkpoint record '" + rec.name + "'");
        const auto rank = r.u32();
        if (rank == 0 || rank > 8) throw CorruptFileError("checkpoint record '" + rec.name + "' has invalid rank");
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto extent = r.u32();
            if (extent == 0) throw CorruptFileError("checkpoint record '" + rec.name + "' has a zero dimension");
            rec.shape.push_back(extent);
            n *= extent;
        }
        if (n > r.remaining() / 4) throw CorruptFileError("checkpoint truncated");
        rec.values.resize(n);
        for (auto& v : rec.values) v = r.f32();
        ckpt.params.push_back(std::move(rec));
    }
    if (r.remaining() != 0) throw CorruptFileError("trailing bytes after checkpoint records");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_checkpoint(bytes);
    } catch (const FormatError& e) {
        if (dynamic_cast<const VersionError*>(&e)) throw VersionError(path.string() + ": " + e.what());
        throw CorruptFileError(path.string() + ": " + e.what());
    }
}

Checkpoint make_checkpoint(const EnhanceNet* fe, const DenoiseNet* fd, const CheckpointMeta& meta) {
    if (fe == nullptr && fd == nullptr) throw ConfigError("make_checkpoint: nothing to save");
    Checkpoint ckpt;
    ckpt.stage = fe && fd ? CheckpointStage::kBoth : (fe ? CheckpointStage::kEnhance : CheckpointStage::kDenoise);
    ckpt.epoch = meta.epoch;
    ckpt.rng_seed = meta.rng_seed;
    ckpt.config_hash = meta.config_hash;
    auto append = [&ckpt](const NamedParams<float>& params) {
        for (const auto& [name, t] : params) {
            const auto d = t.data();
            ckpt.params.push_back({name, t.shape(), std::vector<float>(d.begin(), d.end())});
        }
    };
    if (fe) {
        ckpt.feedback_mode = fe->config().feedback_mode;
        ckpt.feedback_count = static_cast<std::uint32_t>(fe->config().feedback_count);
        append(fe->named_parameters());
    }
    if (fd) {
        ckpt.eta_mode = fd->config().eta_mode;
        append(fd->named_parameters());
    }
    return ckpt;
}

void load_parameters(const Checkpoint& ckpt, const NamedParams<float>& params) {
    for (const auto& [name, tensor] : params) {
        const auto& rec = require(ckpt, name);
        if (rec.shape != tensor.shape())
            throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(rec.shape) +
                              ", model expects " + shape_str(tensor.shape()));
        auto dst = Tensor(tensor).mutable_data();
        std::copy(rec.values.begin(), rec.values.end(), dst.begin());
    }
}

EnhanceNet enhance_net_from(const Checkpoint& ckpt) {
    if (!ckpt.has_enhance()) throw FormatError("checkpoint does not contain an enhancement network");
    EnhanceNetConfig cfg;
    const auto& in = require(ckpt, "fe.input.weight");
    cfg.width = in.shape[0];
    cfg.feedback_mode = ckpt.feedback_mode;
    cfg.feedback_count = ckpt.feedback_count;
    cfg.num_blocks = count_blocks(ckpt, "fe.rcab");
    if (cfg.num_blocks == 0) throw FormatError("checkpoint has no fe residual blocks");
    cfg.reduction = cfg.width / require(ckpt, "fe.rcab0.ca.squeeze.weight").shape[0];
    if (cfg.feedback_mode == FeedbackMode::kFeatures) cfg.fuse_kernel = require(ckpt, "fe.fuse.weight").shape[3];
    EnhanceNet net(cfg, 0);
    load_parameters(ckpt, net.named_parameters());
    net.trained = true;
    return net;
}

std::optional<DenoiseNet> denoise_net_from(const Checkpoint& ckpt) {
    if (!ckpt.has_denoise()) return std::nullopt;
    DenoiseNetConfig cfg;
    cfg.width = require(ckpt, "fd.input.weight").shape[0];
    cfg.eta_mode = ckpt.eta_mode;
    cfg.num_blocks = count_blocks(ckpt, "fd.rcab");
    if (cfg.num_blocks == 0) throw FormatError("checkpoint has no fd residual blocks");
    cfg.reduction = cfg.width / require(ckpt, "fd.rcab0.ca.squeeze.weight").shape[0];
    if (cfg.eta_mode == EtaMode::kFeatures) cfg.fuse_kernel = require(ckpt, "fd.fuse.weight").shape[3];
    DenoiseNet net(cfg, 0);
    load_parameters(ckpt, net.named_parameters());
    return net;
}

}  // namespace selfen
