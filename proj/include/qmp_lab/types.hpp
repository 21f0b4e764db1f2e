#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace qmp {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;

// Scalar field of the model. Everything is computed in complex arithmetic;
// real-mode instances carry zero imaginary parts and tests assert the residue
// stays below 1e-12.
enum class Field { real, complex_circular };

struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

struct config_error : error {
  explicit config_error(const std::string& what) : error(what) {}
};

struct numeric_error : error {
  explicit numeric_error(const std::string& what) : error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw error(what);
}

// parameter validation; callers map config_error onto the config exit code
inline void require_config(bool cond, const std::string& what) {
  if (!cond) throw config_error(what);
}

}  // namespace qmp
