#pragma once

#include <unordered_set>

#include "pcac/point_cloud.hpp"

namespace pcac {

enum class ShapeKind { Sphere, Cube, Plane };
enum class TextureKind { Gradient, Checker, Noise };

struct SynthSpec {
    ShapeKind shape = ShapeKind::Sphere;
    int point_count = 1000;
    TextureKind texture = TextureKind::Gradient;
    uint64_t seed = 0;
    int bit_depth = 8;
    int extent = 0;  // coordinate range per axis; 0 means full 2^bit_depth
};

inline ShapeKind shape_from_name(const std::string& s) {
    if (s == "sphere") return ShapeKind::Sphere;
    if (s == "cube") return ShapeKind::Cube;
    if (s == "plane") return ShapeKind::Plane;
    fail(ErrorKind::UnknownShapeKind, "unknown shape kind: " + s);
}

inline TextureKind texture_from_name(const std::string& s) {
    if (s == "gradient") return TextureKind::Gradient;
    if (s == "checker") return TextureKind::Checker;
    if (s == "noise") return TextureKind::Noise;
    fail(ErrorKind::UnknownShapeKind, "unknown texture kind: " + s);
}

// Deterministic colored cloud on a primitive surface; a pure function of the
// spec. Coordinates are quantized to the spec's bit depth.
inline PointCloud synth_generate(const SynthSpec& spec) {
    if (spec.point_count < 1) fail(ErrorKind::EmptyCloud, "point_count must be >= 1");
    int extent = spec.extent > 0 ? spec.extent : (1 << spec.bit_depth);
    if (extent > (1 << spec.bit_depth)) fail(ErrorKind::ShapeMismatch, "extent exceeds bit depth");

    Rng rng(spec.seed);
    double e = (double)extent;
    double center = e / 2.0;
    double margin = std::max(1.0, 0.08 * e);

    auto sample_position = [&]() -> Coord {
        double x = 0, y = 0, z = 0;
        switch (spec.shape) {
            case ShapeKind::Sphere: {
                double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
                double n = std::sqrt(dx * dx + dy * dy + dz * dz);
                if (n < 1e-12) n = 1.0;
                double r = 0.42 * e;
                x = center + r * dx / n;
                y = center + r * dy / n;
                z = center + r * dz / n;
                break;
            }
            case ShapeKind::Cube: {
                int axis = (int)rng.below(3);
                double side = rng.below(2) ? e - margin : margin;
                double u = rng.uniform(margin, e - margin);
                double v = rng.uniform(margin, e - margin);
                double p[3];
                p[axis] = side;
                p[(axis + 1) % 3] = u;
                p[(axis + 2) % 3] = v;
                x = p[0];
                y = p[1];
                z = p[2];
                break;
            }
            case ShapeKind::Plane: {
                x = rng.uniform(margin, e - margin);
                y = rng.uniform(margin, e - margin);
                z = center;
                break;
            }
        }
        auto q = [&](double t) { return (int32_t)std::clamp((double)std::llround(t), 0.0, e - 1.0); };
        return {q(x), q(y), q(z)};
    };

    auto paint = [&](const Coord& p) -> std::array<float, 3> {
        double inv = 1.0 / std::max(1.0, e - 1.0);
        switch (spec.texture) {
            case TextureKind::Gradient: {
                double y = 255.0 * p[0] * inv;
                double u = 128.0 + 80.0 * (p[1] * inv - 0.5);
                double v = 128.0 + 80.0 * (p[2] * inv - 0.5);
                return {(float)std::llround(y), (float)std::llround(u), (float)std::llround(v)};
            }
            case TextureKind::Checker: {
                int cell = std::max(1, extent / 16);
                int par = (p[0] / cell + p[1] / cell + p[2] / cell) & 1;
                return {par ? 192.0f : 64.0f, 128.0f, 128.0f};
            }
            case TextureKind::Noise: {
                float y = (float)rng.below(256);
                float u = (float)(64 + rng.below(129));
                float v = (float)(64 + rng.below(129));
                return {y, u, v};
            }
        }
        return {0, 0, 0};
    };

    PointCloud pc;
    pc.bit_depth = spec.bit_depth;
    std::unordered_set<Coord, CoordHash> seen;
    int64_t attempts = 0, max_attempts = (int64_t)spec.point_count * 200;
    while ((int)pc.size() < spec.point_count && attempts++ < max_attempts) {
        Coord p = sample_position();
        if (!seen.insert(p).second) continue;
        pc.positions.push_back(p);
        pc.colors.push_back(paint(p));
    }
    sort_canonical(pc);
    return pc;
}

}  // namespace pcac
