#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/mlp.hpp"

namespace fasttd3 {

// Checkpoint container: magic "FTD3", u32 LE format version, then repeated
// tensor records [name_len u32][name utf-8][rank u32][dims rank x u32]
// [data f32 LE]. Loading preserves record order so save(load(x)) is
// byte-identical to x.

constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline bool get_u32(std::istream& in, uint32_t& v) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
        (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    return true;
}

inline void put_f32(std::ostream& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

inline bool get_f32(std::istream& in, float& f) {
    uint32_t v;
    if (!get_u32(in, v)) return false;
    std::memcpy(&f, &v, 4);
    return true;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint file '" + path + "' for writing");
    out.write("FTD3", 4);
    detail::put_u32(out, kCheckpointVersion);
    for (const auto& t : tensors) {
        detail::put_u32(out, static_cast<uint32_t>(t.name.size()));
        out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
        detail::put_u32(out, static_cast<uint32_t>(t.dims.size()));
        size_t count = 1;
        for (uint32_t d : t.dims) {
            detail::put_u32(out, d);
            count *= d;
        }
        if (count != t.data.size()) throw ShapeError("save_checkpoint: dims do not match data length");
        for (float f : t.data) detail::put_f32(out, f);
    }
    if (!out) throw IoError("write failed for checkpoint file '" + path + "'");
}

inline std::vector<NamedTensor> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint file '" + path + "'");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "FTD3", 4) != 0)
        throw IoError("'" + path + "' is not a FTD3 checkpoint");
    uint32_t version;
    if (!detail::get_u32(in, version)) throw IoError("unexpected end of file in checkpoint header");
    if (version != kCheckpointVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");

    std::vector<NamedTensor> tensors;
    for (size_t k = 0;; ++k) {
        uint32_t name_len;
        if (!detail::get_u32(in, name_len)) {
            if (in.eof()) break;
            throw IoError("unexpected end of file at tensor " + std::to_string(k));
        }
        NamedTensor t;
        t.name.resize(name_len);
        if (!in.read(t.name.data(), name_len))
            throw IoError("unexpected end of file at tensor " + std::to_string(k));
        uint32_t rank;
        if (!detail::get_u32(in, rank)) throw IoError("unexpected end of file at tensor " + std::to_string(k));
        size_t count = 1;
        t.dims.resize(rank);
        for (uint32_t i = 0; i < rank; ++i) {
            if (!detail::get_u32(in, t.dims[i]))
                throw IoError("unexpected end of file at tensor " + std::to_string(k));
            count *= t.dims[i];
        }
        t.data.resize(count);
        for (size_t i = 0; i < count; ++i)
            if (!detail::get_f32(in, t.data[i]))
                throw IoError("unexpected end of file at tensor " + std::to_string(k));
        tensors.push_back(std::move(t));
    }
    return tensors;
}

// ---------------------------------------------------------------------------
// Flattening MLPs to named tensors and back

inline void append_mlp_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                               const MlpParams<float>& mlp) {
    for (size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto& layer = mlp.layers[l];
        out.push_back({prefix + "/layer" + std::to_string(l) + "/weight",
                       {static_cast<uint32_t>(layer.weight.rows), static_cast<uint32_t>(layer.weight.cols)},
                       layer.weight.data});
        out.push_back({prefix + "/layer" + std::to_string(l) + "/bias",
                       {static_cast<uint32_t>(layer.bias.size())},
                       layer.bias});
    }
}

// Rebuild an MLP from "<prefix>/layerK/{weight,bias}" records. Unrelated
// names under the prefix are ignored.
inline MlpParams<float> mlp_from_tensors(const std::vector<NamedTensor>& tensors,
                                         const std::string& prefix, Activation output_activation) {
    MlpParams<float> mlp;
    mlp.output_activation = output_activation;
    for (size_t l = 0;; ++l) {
        const std::string wname = prefix + "/layer" + std::to_string(l) + "/weight";
        const std::string bname = prefix + "/layer" + std::to_string(l) + "/bias";
        const NamedTensor* w = nullptr;
        const NamedTensor* b = nullptr;
        for (const auto& t : tensors) {
            if (t.name == wname) w = &t;
            if (t.name == bname) b = &t;
        }
        if (!w && !b) break;
        if (!w || !b) throw IoError("checkpoint is missing weight or bias for " + prefix + "/layer" +
                                    std::to_string(l));
        if (w->dims.size() != 2 || b->dims.size() != 1)
            throw IoError("checkpoint has malformed dims for " + wname);
        DenseLayer<float> layer;
        layer.weight = Tensor2<float>(static_cast<int>(w->dims[0]), static_cast<int>(w->dims[1]), w->data);
        layer.bias = b->data;
        mlp.layers.push_back(std::move(layer));
    }
    if (mlp.layers.empty()) throw IoError("checkpoint has no layers under '" + prefix + "'");
    return mlp;
}

inline void append_adam_tensors(std::vector<NamedTensor>& out, const std::string& prefix,
                                const AdamState<float>& st) {
    for (size_t l = 0; l < st.m.size(); ++l) {
        const std::string layer = "/layer" + std::to_string(l);
        out.push_back({prefix + "/m" + layer + "/weight",
                       {static_cast<uint32_t>(st.m[l].weight.rows), static_cast<uint32_t>(st.m[l].weight.cols)},
                       st.m[l].weight.data});
        out.push_back({prefix + "/m" + layer + "/bias", {static_cast<uint32_t>(st.m[l].bias.size())},
                       st.m[l].bias});
        out.push_back({prefix + "/v" + layer + "/weight",
                       {static_cast<uint32_t>(st.v[l].weight.rows), static_cast<uint32_t>(st.v[l].weight.cols)},
                       st.v[l].weight.data});
        out.push_back({prefix + "/v" + layer + "/bias", {static_cast<uint32_t>(st.v[l].bias.size())},
                       st.v[l].bias});
    }
    // step_count as f32 is exact below 2^24 updates, far beyond desk scale
    out.push_back({prefix + "/step_count", {1}, {static_cast<float>(st.step_count)}});
}

}  // namespace fasttd3
