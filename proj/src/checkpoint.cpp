#include "fracgrad/checkpoint.hpp"

#include "fracgrad/errors.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <sstream>

namespace fracgrad {

namespace {

using nlohmann::json;

void write_le(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    out.write(bytes, 8);
}

double read_le(const unsigned char* bytes) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

json cfg_to_json(const FgdConfig& cfg) {
    return {{"alpha", cfg.alpha},
            {"M", cfg.terms},
            {"mu", cfg.mu},
            {"phi", cfg.phi},
            {"gradient_point", std::string(to_string(cfg.gradient_point))},
            {"momentum", cfg.momentum}};
}

FgdConfig cfg_from_json(const json& j) {
    FgdConfig cfg;
    cfg.alpha = j.at("alpha").get<double>();
    cfg.terms = j.at("M").get<int>();
    cfg.mu = j.at("mu").get<double>();
    cfg.phi = j.at("phi").get<double>();
    cfg.gradient_point = parse_gradient_point(j.at("gradient_point").get<std::string>());
    cfg.momentum = j.at("momentum").get<double>();
    return cfg;
}

void write_atomically(const std::filesystem::path& target, const std::string& bytes) {
    auto tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const Network& network, const FgdConfig& cfg) {
    std::filesystem::create_directories(dir);
    std::ostringstream blob;
    json layers = json::array();
    std::size_t offset = 0;
    std::size_t param = 0;
    for (const Layer& l : network.layers()) {
        json jl = {{"kind", std::string(to_string(l.kind))}};
        if (l.has_params()) {
            jl["in"] = l.in;
            jl["out"] = l.out;
            json params = json::array();
            for (const char* name : {"weights", "bias"}) {
                const Tensor& t = network.parameter(param++);
                params.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}, {"count", t.size()}});
                for (double v : t.values()) write_le(blob, v);
                offset += 8 * t.size();
            }
            jl["params"] = std::move(params);
        }
        layers.push_back(std::move(jl));
    }
    const json manifest = {{"format", "fracgrad-checkpoint"}, {"version", kCheckpointVersion},
                           {"dtype", "float64"},              {"byte_order", "little"},
                           {"data_file", "model.bin"},        {"input_shape", network.input_shape()},
                           {"cfg", cfg_to_json(cfg)},         {"layers", std::move(layers)}};
    write_atomically(dir / "model.bin", blob.str());
    write_atomically(dir / "model.json", manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw FormatError("cannot open " + (dir / "model.json").string());
    json manifest;
    try {
        manifest = json::parse(in);
        if (manifest.at("format") != "fracgrad-checkpoint") throw FormatError("not a fracgrad checkpoint");
        if (manifest.at("version").get<int>() != kCheckpointVersion)
            throw FormatError("unsupported checkpoint version " + manifest.at("version").dump());
        if (manifest.at("dtype") != "float64" || manifest.at("byte_order") != "little")
            throw FormatError("checkpoint must hold little-endian float64 data");
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
    }

    std::ifstream bin(dir / manifest.at("data_file").get<std::string>(), std::ios::binary);
    const std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

    try {
        std::vector<Layer> layers;
        for (const json& jl : manifest.at("layers")) {
            const LayerKind kind = parse_layer_kind(jl.at("kind").get<std::string>());
            Layer l;
            switch (kind) {
            case LayerKind::dense: l = Layer::dense(jl.at("in"), jl.at("out")); break;
            case LayerKind::conv2d: l = Layer::conv2d(jl.at("in"), jl.at("out")); break;
            default: l = Layer::of_kind(kind); break;
            }
            if (l.has_params()) {
                const json& params = jl.at("params");
                if (params.size() != 2) throw FormatError("parameterized layer needs weights and bias");
                for (const json& p : params) {
                    Tensor& target = p.at("name") == "bias" ? *l.bias : *l.weights;
                    const auto shape = p.at("shape").get<Shape>();
                    const auto off = p.at("offset").get<std::size_t>();
                    const auto count = p.at("count").get<std::size_t>();
                    if (shape != target.shape() || count != target.size())
                        throw FormatError("parameter shape does not match layer geometry");
                    if (off + 8 * count > blob.size()) throw FormatError("checkpoint data file is truncated");
                    for (std::size_t i = 0; i < count; ++i) target[i] = read_le(blob.data() + off + 8 * i);
                }
            }
            layers.push_back(std::move(l));
        }
        return {Network(manifest.at("input_shape").get<Shape>(), std::move(layers)), cfg_from_json(manifest.at("cfg"))};
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint manifest: ") + e.what());
    }
}

} // namespace fracgrad
