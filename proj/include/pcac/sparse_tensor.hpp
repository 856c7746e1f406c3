#pragma once

#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "pcac/point_cloud.hpp"

namespace pcac {

using CoordIndex = std::unordered_map<Coord, int32_t, CoordHash>;
using CoordSet = std::unordered_set<Coord, CoordHash>;

// Coordinate-indexed feature map: unique coords in canonical lexicographic
// order, one C-channel feature row per coordinate, all coords divisible by
// the lattice stride.
struct SparseTensor {
    std::vector<Coord> coords;
    std::vector<double> feats;  // row-major [rows x channels]
    int32_t stride = 1;
    int channels = 0;

    int32_t rows() const { return (int32_t)coords.size(); }

    double* row(int32_t r) { return feats.data() + (size_t)r * channels; }
    const double* row(int32_t r) const { return feats.data() + (size_t)r * channels; }

    void validate() const {
        if (feats.size() != coords.size() * (size_t)channels)
            fail(ErrorKind::ShapeMismatch, "feature row count mismatch");
        for (const Coord& c : coords)
            for (int a = 0; a < 3; ++a)
                if (c[a] % stride != 0) fail(ErrorKind::StrideMismatch, "coord not on stride lattice");
    }

    // sort rows into canonical coordinate order
    void canonicalize() {
        std::vector<int32_t> idx(coords.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](int32_t a, int32_t b) { return coords[a] < coords[b]; });
        std::vector<Coord> nc(coords.size());
        std::vector<double> nf(feats.size());
        for (size_t r = 0; r < idx.size(); ++r) {
            nc[r] = coords[idx[r]];
            for (int c = 0; c < channels; ++c) nf[r * channels + c] = feats[(size_t)idx[r] * channels + c];
        }
        coords = std::move(nc);
        feats = std::move(nf);
    }
};

inline CoordIndex make_index(const std::vector<Coord>& coords) {
    CoordIndex idx;
    idx.reserve(coords.size() * 2);
    for (int32_t r = 0; r < (int32_t)coords.size(); ++r) idx.emplace(coords[r], r);
    return idx;
}

// canonically sorted unique coords of the coarser lattice (floor(c/m)*m)
inline std::vector<Coord> downsample_coords(const std::vector<Coord>& coords, int32_t m) {
    CoordSet set;
    set.reserve(coords.size());
    for (const Coord& c : coords) set.insert(lattice_floor(c, m));
    std::vector<Coord> out(set.begin(), set.end());
    std::sort(out.begin(), out.end());
    return out;
}

// stride-1 tensor, features = YUV scaled to [0,1]
inline SparseTensor from_point_cloud(const PointCloud& pc) {
    if (pc.empty()) fail(ErrorKind::EmptyCloud, "cannot build tensor from empty cloud");
    SparseTensor t;
    t.stride = 1;
    t.channels = 3;
    t.coords = pc.positions;
    t.feats.resize(pc.size() * 3);
    for (size_t i = 0; i < pc.size(); ++i)
        for (int c = 0; c < 3; ++c) t.feats[i * 3 + c] = pc.colors[i][c] / 255.0;
    t.canonicalize();
    return t;
}

inline PointCloud to_point_cloud(const SparseTensor& t, int bit_depth = 8) {
    if (t.channels != 3) fail(ErrorKind::ShapeMismatch, "expected 3-channel tensor");
    PointCloud pc;
    pc.bit_depth = bit_depth;
    pc.positions = t.coords;
    pc.colors.resize(t.coords.size());
    for (int32_t r = 0; r < t.rows(); ++r)
        for (int c = 0; c < 3; ++c) pc.colors[r][c] = (float)(t.row(r)[c] * 255.0);
    return pc;
}

// retain rows whose coordinate is in `keep`
inline SparseTensor prune(const SparseTensor& in, const CoordSet& keep) {
    SparseTensor out;
    out.stride = in.stride;
    out.channels = in.channels;
    for (int32_t r = 0; r < in.rows(); ++r) {
        if (!keep.count(in.coords[r])) continue;
        out.coords.push_back(in.coords[r]);
        out.feats.insert(out.feats.end(), in.row(r), in.row(r) + in.channels);
    }
    return out;  // input order was canonical, subset stays canonical
}

}  // namespace pcac
