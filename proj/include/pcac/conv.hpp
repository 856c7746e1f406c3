#pragma once

#include "pcac/sparse_tensor.hpp"

namespace pcac {

struct ConvSpec {
    int kernel_size = 3;  // odd; {3,5,9} in the codec, 1 allowed for tests
    int stride = 1;       // 1 or 2
    int in_channels = 1;
    int out_channels = 1;
    bool transposed = false;

    int offsets() const { return kernel_size * kernel_size * kernel_size; }
    size_t weight_count() const { return (size_t)offsets() * in_channels * out_channels; }

    void validate() const {
        if (kernel_size < 1 || kernel_size % 2 == 0)
            fail(ErrorKind::ShapeMismatch, "kernel size must be odd");
        if (stride != 1 && stride != 2) fail(ErrorKind::ShapeMismatch, "stride must be 1 or 2");
        if (in_channels < 1 || out_channels < 1) fail(ErrorKind::ShapeMismatch, "bad channel count");
    }
};

// kernel offsets in lexicographic (dz,dy,dx) order; index od encodes the
// displacement d = (dx,dy,dz) applied to (x,y,z)
inline Coord kernel_offset(int od, int kernel_size) {
    int r = kernel_size / 2;
    int dx = od % kernel_size;
    int dy = (od / kernel_size) % kernel_size;
    int dz = od / (kernel_size * kernel_size);
    return {dx - r, dy - r, dz - r};
}

// For each kernel offset, (input-row, output-row) index pairs.
//
// Geometric rule (odd kernel centered on the output coordinate, offsets
// measured on the finer lattice):
//   forward:    input  i = o + d * in.stride          (out stride = in * s)
//   transposed: input  c = f - d * out_stride         (out stride = in / s)
// The two rules enumerate the same (d, fine, coarse) triples, which makes
// the transposed operation the exact adjoint of the forward one.
struct KernelMap {
    int kernel_size = 0;
    int32_t n_in = 0, n_out = 0;
    std::vector<std::vector<std::pair<int32_t, int32_t>>> pairs;  // [offset] -> (in,out)

    size_t total_pairs() const {
        size_t n = 0;
        for (const auto& v : pairs) n += v.size();
        return n;
    }
};

inline KernelMap build_kernel_map(const std::vector<Coord>& in_coords, int32_t in_stride,
                                  const std::vector<Coord>& out_coords, int32_t out_stride,
                                  const ConvSpec& spec) {
    spec.validate();
    if (!spec.transposed) {
        if (out_stride != in_stride * spec.stride)
            fail(ErrorKind::StrideMismatch, "output stride must be input stride * conv stride");
    } else {
        if (in_stride != out_stride * spec.stride)
            fail(ErrorKind::StrideMismatch, "input stride must be output stride * conv stride");
    }
    int32_t step = spec.transposed ? out_stride : in_stride;

    CoordIndex in_index = make_index(in_coords);
    KernelMap km;
    km.kernel_size = spec.kernel_size;
    km.n_in = (int32_t)in_coords.size();
    km.n_out = (int32_t)out_coords.size();
    km.pairs.resize(spec.offsets());
    for (int od = 0; od < spec.offsets(); ++od) {
        Coord d = kernel_offset(od, spec.kernel_size);
        Coord delta = {d[0] * step, d[1] * step, d[2] * step};
        auto& list = km.pairs[od];
        for (int32_t o = 0; o < (int32_t)out_coords.size(); ++o) {
            Coord probe = spec.transposed ? out_coords[o] - delta : out_coords[o] + delta;
            auto it = in_index.find(probe);
            if (it != in_index.end()) list.emplace_back(it->second, o);
        }
    }
    return km;
}

// all coordinates a transposed conv can reach on the finer lattice
inline std::vector<Coord> transpose_reachable_coords(const std::vector<Coord>& in_coords,
                                                     int32_t out_stride, const ConvSpec& spec) {
    CoordSet set;
    set.reserve(in_coords.size() * spec.offsets());
    for (int od = 0; od < spec.offsets(); ++od) {
        Coord d = kernel_offset(od, spec.kernel_size);
        Coord delta = {d[0] * out_stride, d[1] * out_stride, d[2] * out_stride};
        for (const Coord& c : in_coords) set.insert(c + delta);
    }
    std::vector<Coord> out(set.begin(), set.end());
    std::sort(out.begin(), out.end());
    return out;
}

namespace conv_detail {

// CSR over output rows; entries keep ascending offset order per row so the
// accumulation order is fixed no matter how rows are partitioned over workers
struct OutAdjacency {
    std::vector<int32_t> row_start;           // n_out + 1
    std::vector<std::pair<int, int32_t>> at;  // (offset, in_row)
};

inline OutAdjacency to_out_adjacency(const KernelMap& km) {
    OutAdjacency adj;
    adj.row_start.assign(km.n_out + 1, 0);
    for (const auto& list : km.pairs)
        for (const auto& [i, o] : list) adj.row_start[o + 1]++;
    for (int32_t o = 0; o < km.n_out; ++o) adj.row_start[o + 1] += adj.row_start[o];
    adj.at.resize(adj.row_start[km.n_out]);
    std::vector<int32_t> cursor(adj.row_start.begin(), adj.row_start.end() - 1);
    for (int od = 0; od < (int)km.pairs.size(); ++od)
        for (const auto& [i, o] : km.pairs[od]) adj.at[cursor[o]++] = {od, i};
    return adj;
}

inline void run_conv(const SparseTensor& in, const double* weights, const double* bias,
                     int in_ch, int out_ch, const KernelMap& km, SparseTensor& out) {
    OutAdjacency adj = to_out_adjacency(km);
    out.feats.assign((size_t)km.n_out * out_ch, 0.0);
    parallel_for(km.n_out, [&](int64_t o) {
        std::vector<double> acc(out_ch);
        for (int oc = 0; oc < out_ch; ++oc) acc[oc] = bias ? bias[oc] : 0.0;
        for (int32_t e = adj.row_start[o]; e < adj.row_start[o + 1]; ++e) {
            auto [od, i] = adj.at[e];
            const double* w = weights + (size_t)od * in_ch * out_ch;
            const double* f = in.row(i);
            for (int ic = 0; ic < in_ch; ++ic) {
                double fv = f[ic];
                const double* wrow = w + (size_t)ic * out_ch;
                for (int oc = 0; oc < out_ch; ++oc) acc[oc] += fv * wrow[oc];
            }
        }
        double* dst = out.feats.data() + (size_t)o * out_ch;
        for (int oc = 0; oc < out_ch; ++oc) dst[oc] = acc[oc];
    });
}

}  // namespace conv_detail

// Weight layout: [offset][in_ch][out_ch], offsets in lexicographic (dz,dy,dx)
// order. stride 1 keeps the input coordinates; stride 2 emits the unique
// floor-projections onto the twice-coarser lattice.
inline SparseTensor sparse_conv(const SparseTensor& in, const std::vector<double>& weights,
                                const std::vector<double>& bias, const ConvSpec& spec) {
    spec.validate();
    if (spec.transposed) fail(ErrorKind::ShapeMismatch, "spec is transposed; use sparse_conv_transpose");
    if (in.channels != spec.in_channels) fail(ErrorKind::ShapeMismatch, "input channel mismatch");
    if (weights.size() != spec.weight_count()) fail(ErrorKind::ShapeMismatch, "weight block size mismatch");
    if (bias.size() != (size_t)spec.out_channels) fail(ErrorKind::ShapeMismatch, "bias size mismatch");

    SparseTensor out;
    out.stride = in.stride * spec.stride;
    out.channels = spec.out_channels;
    out.coords = spec.stride == 1 ? in.coords : downsample_coords(in.coords, in.stride * 2);
    KernelMap km = build_kernel_map(in.coords, in.stride, out.coords, out.stride, spec);
    conv_detail::run_conv(in, weights.data(), bias.data(), spec.in_channels, spec.out_channels, km, out);
    return out;
}

// Transposed (adjoint) convolution; output supported exactly on target_coords
// at the finer stride. The decoder passes the losslessly known geometry here.
inline SparseTensor sparse_conv_transpose(const SparseTensor& in, const std::vector<double>& weights,
                                          const std::vector<double>& bias, const ConvSpec& spec,
                                          const std::vector<Coord>& target_coords) {
    spec.validate();
    if (!spec.transposed) fail(ErrorKind::ShapeMismatch, "spec is not transposed");
    if (in.channels != spec.in_channels) fail(ErrorKind::ShapeMismatch, "input channel mismatch");
    if (weights.size() != spec.weight_count()) fail(ErrorKind::ShapeMismatch, "weight block size mismatch");
    if (bias.size() != (size_t)spec.out_channels) fail(ErrorKind::ShapeMismatch, "bias size mismatch");
    if (in.stride % spec.stride != 0) fail(ErrorKind::StrideMismatch, "input stride not divisible");

    SparseTensor out;
    out.stride = in.stride / spec.stride;
    out.channels = spec.out_channels;
    out.coords = target_coords;
    KernelMap km = build_kernel_map(in.coords, in.stride, out.coords, out.stride, spec);
    conv_detail::run_conv(in, weights.data(), bias.data(), spec.in_channels, spec.out_channels, km, out);
    return out;
}

// ---------------------------------------------------------------------------
// Dense 3D grid reference path. The oracle side of the sparse/dense
// equivalence check; the codec only routes through it under the
// --dense-conv ablation, and only for small extents.
// ---------------------------------------------------------------------------

struct DenseGrid {
    int n = 0;  // cells per axis
    int channels = 0;
    std::vector<double> v;  // [x][y][z][c]

    double& at(int x, int y, int z, int c) { return v[(((size_t)x * n + y) * n + z) * channels + c]; }
    double at(int x, int y, int z, int c) const {
        return v[(((size_t)x * n + y) * n + z) * channels + c];
    }
};

inline DenseGrid make_grid(int n, int channels) {
    DenseGrid g;
    g.n = n;
    g.channels = channels;
    g.v.assign((size_t)n * n * n * channels, 0.0);
    return g;
}

// straightforward triple-loop convolution with zero padding
inline DenseGrid dense_conv_oracle(const DenseGrid& in, const std::vector<double>& weights,
                                   const std::vector<double>& bias, const ConvSpec& spec) {
    spec.validate();
    if (spec.transposed) fail(ErrorKind::ShapeMismatch, "oracle covers forward conv only");
    if (in.channels != spec.in_channels) fail(ErrorKind::ShapeMismatch, "input channel mismatch");
    if (in.n > 32) fail(ErrorKind::DenseConvTooLarge, "oracle grid exceeds 32^3");

    int n_out = spec.stride == 1 ? in.n : (in.n + 1) / 2;
    DenseGrid out = make_grid(n_out, spec.out_channels);
    int K = spec.kernel_size, r = K / 2;
    for (int x = 0; x < n_out; ++x)
        for (int y = 0; y < n_out; ++y)
            for (int z = 0; z < n_out; ++z) {
                std::vector<double> acc(bias.begin(), bias.end());
                int bx = x * spec.stride, by = y * spec.stride, bz = z * spec.stride;
                for (int dz = -r; dz <= r; ++dz)
                    for (int dy = -r; dy <= r; ++dy)
                        for (int dx = -r; dx <= r; ++dx) {
                            int ix = bx + dx, iy = by + dy, iz = bz + dz;
                            if (ix < 0 || iy < 0 || iz < 0 || ix >= in.n || iy >= in.n || iz >= in.n)
                                continue;
                            int od = ((dz + r) * K + (dy + r)) * K + (dx + r);
                            const double* w = weights.data() + (size_t)od * spec.in_channels * spec.out_channels;
                            for (int ic = 0; ic < spec.in_channels; ++ic) {
                                double fv = in.at(ix, iy, iz, ic);
                                if (fv == 0.0) continue;
                                for (int oc = 0; oc < spec.out_channels; ++oc)
                                    acc[oc] += fv * w[(size_t)ic * spec.out_channels + oc];
                            }
                        }
                for (int oc = 0; oc < spec.out_channels; ++oc) out.at(x, y, z, oc) = acc[oc];
            }
    return out;
}

// densify onto a cell-sized lattice anchored at base
inline DenseGrid densify(const SparseTensor& t, const Coord& base, int n, int32_t cell) {
    DenseGrid g = make_grid(n, t.channels);
    for (int32_t row = 0; row < t.rows(); ++row) {
        Coord rel = t.coords[row] - base;
        int x = rel[0] / cell, y = rel[1] / cell, z = rel[2] / cell;
        if (rel[0] % cell || rel[1] % cell || rel[2] % cell || x < 0 || y < 0 || z < 0 || x >= n ||
            y >= n || z >= n)
            fail(ErrorKind::ShapeMismatch, "coordinate outside dense grid");
        for (int c = 0; c < t.channels; ++c) g.at(x, y, z, c) = t.row(row)[c];
    }
    return g;
}

}  // namespace pcac
