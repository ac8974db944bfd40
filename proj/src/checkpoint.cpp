#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "stfa/detector.hpp"
#include "stfa/errors.hpp"

namespace stfa {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'F', 'A'};
constexpr std::uint32_t kVersion = 1;

constexpr const char* kMetaEpoch = "__meta__/epoch";
constexpr const char* kMetaLoss = "__meta__/best_val_loss";
constexpr const char* kMetaConfig = "__meta__/config_json";

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

void put_entry(std::string& out, const std::string& path, const Shape& shape,
               const std::vector<double>& data) {
    if (path.size() > 0xffff) throw DataError("checkpoint: path too long: " + path);
    put_u16(out, static_cast<std::uint16_t>(path.size()));
    out.append(path);
    if (shape.size() > 0xff) throw DataError("checkpoint: rank too large for " + path);
    out.push_back(static_cast<char>(shape.size()));
    for (int e : shape) put_u32(out, static_cast<std::uint32_t>(e));
    for (double d : data) put_f64(out, d);
}

struct Reader {
    const std::string& buf;
    const std::string file;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size())
            throw DataError("checkpoint " + file + ": truncated at byte " + std::to_string(pos));
    }
    std::uint16_t u16() {
        need(2);
        const auto a = static_cast<std::uint8_t>(buf[pos]);
        const auto b = static_cast<std::uint8_t>(buf[pos + 1]);
        pos += 2;
        return static_cast<std::uint16_t>(a | (b << 8));
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
        pos += 8;
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

struct RawEntry {
    Shape shape;
    std::vector<double> data;
};

nlohmann::json blocks_json(const std::vector<ResidualBlockSpec>& blocks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : blocks) arr.push_back({b.channels, b.stride});
    return arr;
}

}  // namespace

std::string model_config_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["input_h"] = cfg.input_h;
    j["input_w"] = cfg.input_w;
    j["dense"] = {{"layers", cfg.dense.layers},
                  {"growth", cfg.dense.growth},
                  {"in_channels", cfg.dense.in_channels}};
    j["attention_maps"] = cfg.attention_maps;
    j["blocks"] = blocks_json(cfg.blocks);
    j["temporal"] = {{"residual_channels", cfg.temporal.residual_channels},
                     {"conv_channels", cfg.temporal.conv_channels},
                     {"embed_dim", cfg.temporal.embed_dim},
                     {"uniform_map", cfg.temporal.uniform_map}};
    j["lookahead"] = cfg.lookahead;
    j["flow_iters"] = cfg.flow_iters;
    j["flow_alpha"] = cfg.flow_alpha;
    j["seed"] = cfg.seed;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        ModelConfig cfg;
        cfg.input_h = j.at("input_h").get<int>();
        cfg.input_w = j.at("input_w").get<int>();
        const auto& d = j.at("dense");
        cfg.dense.layers = d.at("layers").get<int>();
        cfg.dense.growth = d.at("growth").get<int>();
        cfg.dense.in_channels = d.at("in_channels").get<int>();
        cfg.attention_maps = j.at("attention_maps").get<int>();
        cfg.blocks.clear();
        for (const auto& b : j.at("blocks"))
            cfg.blocks.push_back({b.at(0).get<int>(), b.at(1).get<int>()});
        const auto& t = j.at("temporal");
        cfg.temporal.residual_channels = t.at("residual_channels").get<int>();
        cfg.temporal.conv_channels = t.at("conv_channels").get<int>();
        cfg.temporal.embed_dim = t.at("embed_dim").get<int>();
        cfg.temporal.uniform_map = t.at("uniform_map").get<bool>();
        cfg.lookahead = j.at("lookahead").get<int>();
        cfg.flow_iters = j.at("flow_iters").get<int>();
        cfg.flow_alpha = j.at("flow_alpha").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config json: ") + e.what());
    }
}

void save_checkpoint(const std::filesystem::path& path, const DetectorParams& params,
                     const ModelConfig& cfg, int epoch, double best_val_loss) {
    const NamedParams names = params.named();
    const std::string config = model_config_json(cfg);

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(names.size() + 3));
    for (const auto& [name, t] : names) put_entry(out, name, t->shape, t->data);
    put_entry(out, kMetaEpoch, {1}, {static_cast<double>(epoch)});
    put_entry(out, kMetaLoss, {1}, {best_val_loss});
    std::vector<double> chars(config.begin(), config.end());
    put_entry(out, kMetaConfig, {static_cast<int>(chars.size())}, chars);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("checkpoint write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path.string());
    const std::string buf(std::istreambuf_iterator<char>(f), {});
    Reader r{buf, path.string()};

    if (r.bytes(4) != std::string(kMagic, 4))
        throw DataError("checkpoint " + path.string() + ": bad magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw DataError("checkpoint " + path.string() + ": unsupported version " +
                        std::to_string(version));
    const std::uint32_t count = r.u32();

    std::map<std::string, RawEntry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = r.u16();
        std::string name = r.bytes(len);
        const std::uint8_t rank = r.u8();
        RawEntry e;
        std::int64_t n = 1;
        for (int d = 0; d < rank; ++d) {
            const auto ext = static_cast<int>(r.u32());
            e.shape.push_back(ext);
            n *= ext;
        }
        if (n < 0 || n > (1 << 28))
            throw DataError("checkpoint " + path.string() + ": implausible extents for " + name);
        e.data.reserve(static_cast<std::size_t>(n));
        for (std::int64_t k = 0; k < n; ++k) e.data.push_back(r.f64());
        if (!entries.emplace(std::move(name), std::move(e)).second)
            throw DataError("checkpoint " + path.string() + ": duplicate entry");
    }
    if (r.pos != buf.size())
        throw DataError("checkpoint " + path.string() + ": trailing bytes");

    auto meta = [&](const char* key) -> RawEntry& {
        auto it = entries.find(key);
        if (it == entries.end())
            throw DataError("checkpoint " + path.string() + ": missing " + key);
        return it->second;
    };

    const RawEntry& config_raw = meta(kMetaConfig);
    std::string config_text;
    for (double d : config_raw.data) config_text.push_back(static_cast<char>(d));

    LoadedCheckpoint out;
    out.config = model_config_from_json(config_text);
    out.epoch = static_cast<int>(meta(kMetaEpoch).data.at(0));
    out.best_val_loss = meta(kMetaLoss).data.at(0);
    out.params = init_detector(out.config);

    std::vector<std::string> missing, mismatched, unexpected;
    std::map<std::string, bool> used;
    for (const auto& [name, t] : out.params.named()) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            missing.push_back(name);
            continue;
        }
        used[name] = true;
        if (it->second.shape != t->shape) {
            mismatched.push_back(name + " (" + shape_str(it->second.shape) + " vs " +
                                 shape_str(t->shape) + ")");
            continue;
        }
        t->data = it->second.data;
    }
    for (const auto& [name, e] : entries) {
        if (name.rfind("__meta__/", 0) == 0) continue;
        if (!used.count(name)) unexpected.push_back(name);
    }
    if (!missing.empty() || !mismatched.empty() || !unexpected.empty()) {
        std::string msg = "checkpoint " + path.string() + ":";
        auto join = [&](const char* label, const std::vector<std::string>& v) {
            if (v.empty()) return;
            msg += std::string(" ") + label + " [";
            for (std::size_t i = 0; i < v.size(); ++i) msg += (i ? ", " : "") + v[i];
            msg += "]";
        };
        join("missing", missing);
        join("mismatched", mismatched);
        join("unexpected", unexpected);
        throw DataError(msg);
    }
    return out;
}

}  // namespace stfa
