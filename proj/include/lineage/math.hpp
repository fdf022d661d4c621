#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace lineage {

// Deterministic RNG wrapper. All sampling is implemented on top of raw
// mt19937_64 output so that streams are reproducible across standard
// libraries (std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, spare value cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mean, double stddev) {
        return mean + stddev * gaussian();
    }

    // Uniform integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = 0;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a base seed with a stream index so per-entity streams are independent
// of each other but fully determined by (seed, index). splitmix64 finalizer.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Logistic function, exponent clamped so |t| up to ~1e3 cannot overflow.
inline double sigmoid(double t) {
    if (t > 500.0) t = 500.0;
    if (t < -500.0) t = -500.0;
    if (t >= 0.0) {
        const double e = std::exp(-t);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

namespace detail {

constexpr double kLogClamp = 1e-12;

// log with the argument clamped to [1e-12, 1 - 1e-12]; keeps BCE finite.
inline double clamped_log(double p) {
    if (p < kLogClamp) p = kLogClamp;
    if (p > 1.0 - kLogClamp) p = 1.0 - kLogClamp;
    return std::log(p);
}

} // namespace detail

inline double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

inline double squared_norm(const double* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += a[k] * a[k];
    return s;
}

// Minimal dense row-major matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

// Mutable view of a contiguous block interpreted as a row-major matrix.
struct MatrixView {
    double* ptr = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double* row(std::size_t r) { return ptr + r * cols; }
    const double* row(std::size_t r) const { return ptr + r * cols; }
};

struct ConstMatrixView {
    const double* ptr = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    const double* row(std::size_t r) const { return ptr + r * cols; }
};

} // namespace lineage
