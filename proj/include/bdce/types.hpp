#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bdce {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;  // column-major, interleaved re/im
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

inline constexpr double kLight = 299792458.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kVarFloor = 1e-12;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bdce
