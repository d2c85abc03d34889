#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace rfedit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Field evaluations are only defined on the interior of [0,1]: the noise
// recovery divides by b(t) and the eps/velocity conversion divides by a(t).
inline constexpr double kTMin = 0.01;
inline constexpr double kTMax = 0.99;

// Floor for per-component variances; keeps every Gaussian non-degenerate.
inline constexpr double kSigmaMinSq = 1e-6;

// Iterates and integrator states beyond this norm abort with DivergenceError.
inline constexpr double kDivergenceNorm = 1e6;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegeneratePathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnreliableEstimateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require_time_in_clamp(double t) {
  if (!(t >= kTMin && t <= kTMax)) {
    throw DomainError("time " + std::to_string(t) + " outside clamp range [" +
                      std::to_string(kTMin) + ", " + std::to_string(kTMax) + "]");
  }
}

inline void require_same_dim(const Vec& a, const Vec& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" +
                     std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace rfedit
