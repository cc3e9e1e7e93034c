#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sssnet {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Cluster id per node, values in [0, K).
using Labels = std::vector<int>;

/// Raised when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
  public:
	using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot produce a valid result.
class NumericalError : public std::runtime_error {
  public:
	using std::runtime_error::runtime_error;
};

inline int cluster_count(const Labels& labels) {
	int k = 0;
	for (int l : labels) {
		if (l < 0) throw InvalidInput("negative cluster id " + std::to_string(l));
		k = std::max(k, l + 1);
	}
	return k;
}

} // namespace sssnet
