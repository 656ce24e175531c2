#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace dmpc {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec3 = Eigen::Vector3d;
using Vec6 = Vector6<double>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

class InvalidParameter : public std::invalid_argument {
 public:
  explicit InvalidParameter(const std::string& what)
      : std::invalid_argument(what) {}
};

class DegenerateGeometry : public std::runtime_error {
 public:
  explicit DegenerateGeometry(const std::string& what)
      : std::runtime_error(what) {}
};

class StalePrediction : public std::runtime_error {
 public:
  explicit StalePrediction(const std::string& what)
      : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidParameter(message);
}

// Linear constraint block: rows of A z (==|<=) b.
struct LinearRows {
  MatX A;
  VecX b;

  Eigen::Index rows() const { return A.rows(); }
};

}  // namespace dmpc
