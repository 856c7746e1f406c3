#pragma once

#include <algorithm>
#include <map>
#include <unordered_map>

#include "pcac/common.hpp"

namespace pcac {

// ---------------------------------------------------------------------------
// Color space: full-range BT.709. U and V are offset by 128 so every channel
// lives in [0, 255].
// ---------------------------------------------------------------------------

using Color3 = std::array<double, 3>;

// Both conversions are pure linear maps; clamping happens only where uchar
// output is produced, so the two compose to the identity on all inputs.
inline Color3 rgb_to_yuv(const Color3& rgb) {
    double r = rgb[0], g = rgb[1], b = rgb[2];
    double y = 0.2126 * r + 0.7152 * g + 0.0722 * b;
    double u = (b - y) / 1.8556 + 128.0;
    double v = (r - y) / 1.5748 + 128.0;
    return {y, u, v};
}

// exact inverse of rgb_to_yuv before clamping
inline Color3 yuv_to_rgb(const Color3& yuv) {
    double y = yuv[0];
    double u = yuv[1] - 128.0;
    double v = yuv[2] - 128.0;
    double r = y + 1.5748 * v;
    double b = y + 1.8556 * u;
    double g = (y - 0.2126 * r - 0.0722 * b) / 0.7152;
    return {r, g, b};
}

// ---------------------------------------------------------------------------
// PointCloud: integer voxel positions plus per-point YUV attributes.
// ---------------------------------------------------------------------------

struct PointCloud {
    std::vector<Coord> positions;
    std::vector<std::array<float, 3>> colors;  // YUV, each channel in [0,255]
    int bit_depth = 8;

    size_t size() const { return positions.size(); }
    bool empty() const { return positions.empty(); }

    void validate() const {
        if (positions.size() != colors.size())
            fail(ErrorKind::ShapeMismatch, "positions/colors length mismatch");
        int32_t hi = int32_t(1) << bit_depth;
        for (const Coord& p : positions)
            for (int a = 0; a < 3; ++a)
                if (p[a] < 0 || p[a] >= hi)
                    fail(ErrorKind::ShapeMismatch, "coordinate out of bit-depth range");
    }
};

// Merge duplicate positions by channel-wise mean. The values of each group
// are sorted before summation so the result is independent of input order.
inline PointCloud merge_duplicates(const PointCloud& in) {
    std::map<Coord, std::vector<std::array<float, 3>>> groups;
    for (size_t i = 0; i < in.positions.size(); ++i) groups[in.positions[i]].push_back(in.colors[i]);

    PointCloud out;
    out.bit_depth = in.bit_depth;
    out.positions.reserve(groups.size());
    out.colors.reserve(groups.size());
    for (auto& [pos, vals] : groups) {
        std::sort(vals.begin(), vals.end());
        double acc[3] = {0, 0, 0};
        for (const auto& v : vals)
            for (int c = 0; c < 3; ++c) acc[c] += v[c];
        double inv = 1.0 / (double)vals.size();
        out.positions.push_back(pos);
        out.colors.push_back({float(acc[0] * inv), float(acc[1] * inv), float(acc[2] * inv)});
    }
    return out;
}

// canonical lexicographic position order, carrying colors along
inline void sort_canonical(PointCloud& pc) {
    std::vector<size_t> idx(pc.positions.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return pc.positions[a] < pc.positions[b]; });
    std::vector<Coord> pos(idx.size());
    std::vector<std::array<float, 3>> col(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
        pos[i] = pc.positions[idx[i]];
        col[i] = pc.colors[idx[i]];
    }
    pc.positions = std::move(pos);
    pc.colors = std::move(col);
}

// 64-bit FNV-1a over the sorted position triples (12 LE bytes each)
inline uint64_t geometry_digest(const std::vector<Coord>& positions) {
    std::vector<Coord> sorted = positions;
    std::sort(sorted.begin(), sorted.end());
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Coord& p : sorted) {
        uint8_t buf[12];
        for (int a = 0; a < 3; ++a) {
            uint32_t u = (uint32_t)p[a];
            buf[4 * a + 0] = uint8_t(u);
            buf[4 * a + 1] = uint8_t(u >> 8);
            buf[4 * a + 2] = uint8_t(u >> 16);
            buf[4 * a + 3] = uint8_t(u >> 24);
        }
        h = fnv1a64(buf, 12, h);
    }
    return h;
}

}  // namespace pcac
