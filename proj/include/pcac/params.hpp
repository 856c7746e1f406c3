#pragma once

#include <fstream>
#include <map>

#include "pcac/common.hpp"

namespace pcac {

struct Parameter {
    std::string id;
    std::vector<uint32_t> dims;
    std::vector<float> value;
    std::vector<float> grad;

    size_t size() const { return value.size(); }
};

// Trainable weights keyed by stable string paths; std::map keeps iteration
// order canonical so training trajectories are reproducible.
struct ParamStore {
    std::map<std::string, Parameter> params;

    Parameter& add(const std::string& id, std::vector<uint32_t> dims) {
        if (params.count(id)) fail(ErrorKind::ShapeMismatch, "duplicate parameter id " + id);
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        Parameter p;
        p.id = id;
        p.dims = std::move(dims);
        p.value.assign(n, 0.0f);
        p.grad.assign(n, 0.0f);
        return params.emplace(id, std::move(p)).first->second;
    }

    Parameter& at(const std::string& id) {
        auto it = params.find(id);
        if (it == params.end()) fail(ErrorKind::ShapeMismatch, "unknown parameter id " + id);
        return it->second;
    }
    const Parameter& at(const std::string& id) const {
        auto it = params.find(id);
        if (it == params.end()) fail(ErrorKind::ShapeMismatch, "unknown parameter id " + id);
        return it->second;
    }

    void zero_grads() {
        for (auto& [_, p] : params) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
    }

    size_t total_values() const {
        size_t n = 0;
        for (const auto& [_, p] : params) n += p.size();
        return n;
    }

    // hash of all values, for parameter-isolation audits
    uint64_t value_hash() const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto& [id, p] : params) {
            h = fnv1a64((const uint8_t*)id.data(), id.size(), h);
            h = fnv1a64((const uint8_t*)p.value.data(), p.value.size() * 4, h);
        }
        return h;
    }
};

// ---------------------------------------------------------------------------
// Checkpoint file: magic "PCGN", version u16, param count u32, then per
// parameter: id length u16 + UTF-8 id, rank u8, dims u32 each, f32 payload.
// All integers and floats little-endian.
// ---------------------------------------------------------------------------

namespace ckpt_detail {

inline void put_u16(std::ostream& f, uint16_t v) {
    uint8_t b[2] = {uint8_t(v), uint8_t(v >> 8)};
    f.write((const char*)b, 2);
}
inline void put_u32(std::ostream& f, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    f.write((const char*)b, 4);
}
inline uint16_t get_u16(std::istream& f) {
    uint8_t b[2];
    f.read((char*)b, 2);
    return uint16_t(b[0] | (b[1] << 8));
}
inline uint32_t get_u32(std::istream& f) {
    uint8_t b[4];
    f.read((char*)b, 4);
    return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) | (uint32_t(b[3]) << 24);
}

}  // namespace ckpt_detail

inline constexpr uint16_t kCheckpointVersion = 1;

inline void save_checkpoint(const ParamStore& store, const std::string& path) {
    using namespace ckpt_detail;
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
    f.write("PCGN", 4);
    put_u16(f, kCheckpointVersion);
    put_u32(f, (uint32_t)store.params.size());
    for (const auto& [id, p] : store.params) {
        put_u16(f, (uint16_t)id.size());
        f.write(id.data(), (std::streamsize)id.size());
        f.put((char)p.dims.size());
        for (uint32_t d : p.dims) put_u32(f, d);
        f.write((const char*)p.value.data(), (std::streamsize)(p.value.size() * 4));
    }
    if (!f) fail(ErrorKind::IoError, "write failed for " + path);
}

inline ParamStore load_checkpoint(const std::string& path) {
    using namespace ckpt_detail;
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::IoError, "cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::string(magic, 4) != "PCGN") fail(ErrorKind::VersionMismatch, "bad checkpoint magic");
    uint16_t version = get_u16(f);
    if (!f || version != kCheckpointVersion) fail(ErrorKind::VersionMismatch, "unsupported checkpoint version");
    uint32_t count = get_u32(f);
    if (!f) fail(ErrorKind::VersionMismatch, "truncated checkpoint header");

    ParamStore store;
    for (uint32_t k = 0; k < count; ++k) {
        uint16_t id_len = get_u16(f);
        std::string id(id_len, '\0');
        f.read(id.data(), id_len);
        int rank = f.get();
        if (!f || rank < 0) fail(ErrorKind::IoError, "truncated checkpoint");
        std::vector<uint32_t> dims(rank);
        size_t n = 1;
        for (int i = 0; i < rank; ++i) {
            dims[i] = get_u32(f);
            n *= dims[i];
        }
        if (!f) fail(ErrorKind::IoError, "truncated checkpoint");
        Parameter& p = store.add(id, dims);
        f.read((char*)p.value.data(), (std::streamsize)(n * 4));
        if (!f) fail(ErrorKind::IoError, "truncated checkpoint payload in " + id);
    }
    return store;
}

// Load a checkpoint into an existing architecture: ids and shapes must match
// exactly in both directions.
inline void load_checkpoint_into(ParamStore& dst, const std::string& path) {
    ParamStore src = load_checkpoint(path);
    for (const auto& [id, p] : dst.params)
        if (!src.params.count(id))
            fail(ErrorKind::ShapeMismatch, "checkpoint missing parameter " + id);
    for (auto& [id, p] : src.params) {
        auto it = dst.params.find(id);
        if (it == dst.params.end())
            fail(ErrorKind::ShapeMismatch, "checkpoint has extra parameter " + id);
        if (it->second.dims != p.dims)
            fail(ErrorKind::ShapeMismatch, "checkpoint shape mismatch for " + id);
    }
    for (auto& [id, p] : src.params) dst.params.find(id)->second.value = std::move(p.value);
    dst.zero_grads();
}

}  // namespace pcac
