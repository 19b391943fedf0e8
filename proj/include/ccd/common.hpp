#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccd {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Bad user-supplied configuration (unknown dataset, factor name, ...).
/// CLI maps this to exit code 2.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A call-site contract was violated (shape mismatch, index out of range).
struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A computation produced non-finite values.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A task has too few positive samples to build a training set from.
struct task_too_small : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

/// Deterministic random source used everywhere. One instance per run;
/// state round-trips through text so checkpoints can resume bit-exactly.
/// Draws are stateless transforms of the engine output (no distribution
/// caches), so serializing the engine captures the whole stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        // single-value Box-Muller; u1 nudged away from 0
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1 + 1e-300));
        return r * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Integer in [0, n). Modulo bias is ~n/2^64, irrelevant at our sizes.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    Mat gaussian_matrix(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = gaussian();
        return m;
    }

    Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
        Mat m(rows, cols);
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = lo + (hi - lo) * uniform();
        return m;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

}  // namespace ccd
