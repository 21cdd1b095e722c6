#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gavn {

// Validation failures throw std::invalid_argument; numerical failures
// (NaN loss, divergence) throw std::runtime_error. The CLI maps these
// to exit codes 1 and 2.
inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

struct Shape4 {
    int b = 0, c = 0, h = 0, w = 0;

    bool operator==(const Shape4& o) const {
        return b == o.b && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape4& o) const { return !(*this == o); }

    std::int64_t elems() const {
        return std::int64_t(b) * c * h * w;
    }

    std::string str() const {
        std::ostringstream os;
        os << "(" << b << "," << c << "," << h << "," << w << ")";
        return os.str();
    }
};

// Dense row-major (batch, channel, height, width) array. Audio windows are
// stored as (B, C, 1, L), flat vectors as (B, D, 1, 1).
template <class T>
struct Tensor4 {
    Shape4 shape{0, 0, 0, 0};
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int b, int c, int h, int w)
        : shape{b, c, h, w}, v(std::size_t(shape.elems()), T(0)) {}
    explicit Tensor4(Shape4 s) : Tensor4(s.b, s.c, s.h, s.w) {}

    static Tensor4 full(int b, int c, int h, int w, T value) {
        Tensor4 t(b, c, h, w);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    std::int64_t size() const { return shape.elems(); }
    bool empty() const { return v.empty(); }

    T& at(int ib, int ic, int iy, int ix) {
        return v[((std::size_t(ib) * shape.c + ic) * shape.h + iy) * shape.w + ix];
    }
    const T& at(int ib, int ic, int iy, int ix) const {
        return v[((std::size_t(ib) * shape.c + ic) * shape.h + iy) * shape.w + ix];
    }

    T* plane(int ib, int ic) {
        return v.data() + (std::size_t(ib) * shape.c + ic) * shape.h * shape.w;
    }
    const T* plane(int ib, int ic) const {
        return v.data() + (std::size_t(ib) * shape.c + ic) * shape.h * shape.w;
    }

    bool same_shape(const Tensor4& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (const T& x : v)
            if (!std::isfinite(double(x))) return false;
        return true;
    }

    template <class U>
    Tensor4<U> cast() const {
        Tensor4<U> out(shape.b, shape.c, shape.h, shape.w);
        for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = U(v[i]);
        return out;
    }
};

// Reflect (symmetric, border-inclusive) index mapping: -1 -> 0, -2 -> 1,
// n -> n-1. Used by every padded operator in the project.
inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Derives an independent stream seed; used to split one run seed into
// per-purpose streams (weights, data order, scene geometry, ...).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    return splitmix64(seed ^ splitmix64(tag));
}

// mt19937_64 with hand-rolled transforms. std::*_distribution output is
// implementation-defined, so everything downstream of a seed goes through
// this wrapper to stay bit-reproducible.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    // [0, 1)
    double uniform() {
        return double(gen() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) {
        return a + (b - a) * uniform();
    }

    // Box-Muller; two draws per call, no cached spare.
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Inclusive range.
    int uniform_int(int lo, int hi) {
        return lo + int(gen() % std::uint64_t(hi - lo + 1));
    }
};

namespace detail {
inline int& thread_count_ref() {
    static int n = 0;  // 0 = auto
    return n;
}
}  // namespace detail

inline void set_thread_count(int n) { detail::thread_count_ref() = n; }

inline int thread_count() {
    int n = detail::thread_count_ref();
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Splits [0, n) into contiguous chunks, one thread each. Every index is
// processed by exactly one thread and the per-index work is serial, so
// results are bit-identical for any thread count.
inline void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& body) {
    int nt = thread_count();
    if (nt <= 1 || n < 2) {
        body(0, n);
        return;
    }
    if (std::int64_t(nt) > n) nt = int(n);
    std::vector<std::thread> workers;
    workers.reserve(std::size_t(nt));
    std::int64_t chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        std::int64_t lo = t * chunk;
        std::int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& w : workers) w.join();
}

}  // namespace gavn
