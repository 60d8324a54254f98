#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace cylscat {

using Real    = double;
using Complex = std::complex<double>;
using Index   = Eigen::Index;

using VecX  = Eigen::VectorXd;
using VecXc = Eigen::VectorXcd;
using MatX  = Eigen::MatrixXd;
using MatXc = Eigen::MatrixXcd;
using SpMat  = Eigen::SparseMatrix<Real>;
using SpMatC = Eigen::SparseMatrix<Complex>;
using Triplet  = Eigen::Triplet<Real>;
using TripletC = Eigen::Triplet<Complex>;

/// Thrown on invalid inputs and violated preconditions.
class InvalidArgument : public std::runtime_error {
public:
  explicit InvalidArgument(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a numerical contract fails (singular closure, pole proximity, ...).
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

constexpr Real kPi = 3.14159265358979323846;

} // namespace cylscat
