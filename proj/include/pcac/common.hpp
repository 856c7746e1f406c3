#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pcac {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
    IoError,
    MalformedPly,
    UnknownShapeKind,
    EmptyCloud,
    EmptyDataset,
    EmptyBatch,
    ShapeMismatch,
    StrideMismatch,
    UnsetClasses,
    MissingVoxel,
    DetachedLoss,
    VersionMismatch,
    Overflow,
    CorruptStream,
    DigestMismatch,
    MissingGeometry,
    AlignmentError,
    GeometryMismatch,
    InsufficientPoints,
    NoOverlap,
    DenseConvTooLarge,
    UsageError,
};

struct Error : std::runtime_error {
    ErrorKind kind;
    Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

// ---------------------------------------------------------------------------
// Coordinates
// ---------------------------------------------------------------------------

using Coord = std::array<int32_t, 3>;

inline Coord operator+(const Coord& a, const Coord& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Coord operator-(const Coord& a, const Coord& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

// floor division toward -inf, valid for negatives
inline int32_t floor_div(int32_t a, int32_t b) {
    int32_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// snap to the coarser lattice: floor(c / m) * m per axis
inline Coord lattice_floor(const Coord& c, int32_t m) {
    return {floor_div(c[0], m) * m, floor_div(c[1], m) * m, floor_div(c[2], m) * m};
}

struct CoordHash {
    size_t operator()(const Coord& c) const {
        // splitmix-style mix of the packed triple
        uint64_t h = (uint64_t)(uint32_t)c[0];
        h = h * 0x9e3779b97f4a7c15ULL ^ (uint64_t)(uint32_t)c[1];
        h = h * 0x9e3779b97f4a7c15ULL ^ (uint64_t)(uint32_t)c[2];
        h ^= h >> 31;
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 29;
        return (size_t)h;
    }
};

// ---------------------------------------------------------------------------
// Deterministic RNG (identical across platforms; stdlib distributions are not)
// ---------------------------------------------------------------------------

struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed = 0) : state(seed + 0x9e3779b97f4a7c15ULL) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return (double)(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // standard normal, Box-Muller on the deterministic uniform
    double normal() {
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // derive an independent stream; used to decouple e.g. dropout from data order
    Rng fork(uint64_t salt) const {
        Rng r(0);
        r.state = state ^ (salt * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL);
        return r;
    }
};

// ---------------------------------------------------------------------------
// Hashing / logging / parallelism helpers
// ---------------------------------------------------------------------------

inline uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

// log levels: 0 silent, 1 info, 2 debug; from PCAC_LOG
inline int log_level() {
    static int lvl = [] {
        const char* e = std::getenv("PCAC_LOG");
        if (!e) return 0;
        std::string s(e);
        if (s == "debug" || s == "2") return 2;
        if (s == "info" || s == "1") return 1;
        return 0;
    }();
    return lvl;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
    if (log_level() >= 1) {
        std::fprintf(stderr, "[pcac] ");
        std::fprintf(stderr, fmt, args...);
        std::fprintf(stderr, "\n");
    }
}

// Global worker count for parallel loops. Results are required to be
// bit-identical for any value: workers only partition rows, each row's
// accumulation order is fixed.
inline int& thread_count() {
    static int n = 1;
    return n;
}

template <typename F>
void parallel_for(int64_t n, F&& body) {
    int workers = thread_count();
    if (workers <= 1 || n < 256) {
        for (int64_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        int64_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (int64_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace pcac
