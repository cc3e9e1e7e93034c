#pragma once

// Extreme eigenpairs of symmetric matrices and symmetric-definite pencils.
// Small problems go through a dense solver; larger ones through a restarted
// Krylov / Rayleigh-Ritz iteration with full reorthogonalization.

#include "sssnet/rng.hpp"
#include "sssnet/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace sssnet {

enum class EigenEnd { Smallest, Largest };

struct EigenResult {
	/// Ascending for Smallest, descending for Largest.
	Vector values;
	Matrix vectors;
	double max_residual = 0.0;
	int matvecs = 0;
};

struct EigenOptions {
	double tolerance = 1e-6;
	Index dense_threshold = 500;
	int max_restarts = 2000;
	/// Krylov basis size; 0 picks a default from K.
	Index basis = 0;
	std::uint64_t seed = 0x5eed;
};

/// Applies the operator to a block of column vectors.
using BlockOperator = std::function<Matrix(const Matrix&)>;

namespace detail {

inline EigenResult select_dense(const Matrix& m, int K, EigenEnd end) {
	Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()));
	if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
	const Index n = m.rows();
	EigenResult r;
	r.values.resize(K);
	r.vectors.resize(n, K);
	for (int k = 0; k < K; ++k) {
		const Index idx = end == EigenEnd::Smallest ? k : n - 1 - k;
		r.values[k] = es.eigenvalues()[idx];
		r.vectors.col(k) = es.eigenvectors().col(idx);
	}
	r.max_residual = 0.0;
	for (int k = 0; k < K; ++k) {
		r.max_residual = std::max(r.max_residual, (m * r.vectors.col(k) - r.values[k] * r.vectors.col(k)).norm());
	}
	return r;
}

inline Vector random_vector(Index n, Rng& rng) {
	Vector v(n);
	for (Index i = 0; i < n; ++i) v[i] = rng.uniform() - 0.5;
	return v;
}

class KrylovBasis {
  public:
	KrylovBasis(Index n, Index capacity) : m_v(n, capacity), m_av(n, capacity) {}

	Index size() const { return m_size; }
	Index capacity() const { return m_v.cols(); }
	auto basis() const { return m_v.leftCols(m_size); }
	auto images() const { return m_av.leftCols(m_size); }

	void reset(const Matrix& v, const Matrix& av) {
		m_size = v.cols();
		m_v.leftCols(m_size) = v;
		m_av.leftCols(m_size) = av;
	}

	/// Orthogonalizes (two passes) and appends; returns false if the vector vanished.
	bool orthonormalize(Vector& w) const {
		const double before = w.norm();
		if (before == 0.0) return false;
		for (int pass = 0; pass < 2; ++pass) {
			if (m_size > 0) w -= basis() * (basis().transpose() * w);
		}
		const double after = w.norm();
		if (after <= 1e-10 * before) return false;
		w /= after;
		return true;
	}

	void append(const Vector& w, const Vector& aw) {
		m_v.col(m_size) = w;
		m_av.col(m_size) = aw;
		++m_size;
	}

  private:
	Matrix m_v;
	Matrix m_av;
	Index m_size = 0;
};

} // namespace detail

/// K extreme eigenpairs of a symmetric operator of order n.
inline EigenResult eig_extreme(Index n, const BlockOperator& op, int K, EigenEnd end, const EigenOptions& opt = {}) {
	if (K < 1 || K > n) throw InvalidInput("eig_extreme: need 1 <= K <= n");
	if (n <= opt.dense_threshold) {
		EigenResult r = detail::select_dense(op(Matrix::Identity(n, n)), K, end);
		r.matvecs = static_cast<int>(n);
		return r;
	}
	const Index m = std::min<Index>(n, opt.basis > 0 ? opt.basis : std::max<Index>(2 * K + 40, 60));
	const Index keep = std::min<Index>(m - 1, K + (m - K) / 3);
	Rng rng(opt.seed);
	detail::KrylovBasis basis(n, m);
	EigenResult r;
	auto matvec = [&](const Vector& v) {
		++r.matvecs;
		return Vector(op(v));
	};
	auto push = [&](Vector w) {
		for (int attempt = 0; attempt < 8; ++attempt) {
			if (basis.orthonormalize(w)) {
				basis.append(w, matvec(w));
				return;
			}
			w = detail::random_vector(n, rng);
		}
		throw NumericalError("eig_extreme: could not extend Krylov basis");
	};
	push(detail::random_vector(n, rng));

	double worst = std::numeric_limits<double>::infinity();
	for (int restart = 0; restart <= opt.max_restarts; ++restart) {
		while (basis.size() < m) push(basis.images().col(basis.size() - 1));
		Matrix t = basis.basis().transpose() * basis.images();
		t = 0.5 * (t + t.transpose()).eval();
		Eigen::SelfAdjointEigenSolver<Matrix> es(t);
		// order Ritz pairs from the requested end inwards
		std::vector<Index> order(static_cast<std::size_t>(m));
		std::iota(order.begin(), order.end(), Index{0});
		if (end == EigenEnd::Largest) std::reverse(order.begin(), order.end());
		Matrix s(m, keep);
		Vector theta(keep);
		for (Index j = 0; j < keep; ++j) {
			s.col(j) = es.eigenvectors().col(order[j]);
			theta[j] = es.eigenvalues()[order[j]];
		}
		Matrix y = basis.basis() * s;
		Matrix ay = basis.images() * s;
		worst = 0.0;
		Index first_bad = -1;
		for (Index j = 0; j < K; ++j) {
			const double res = (ay.col(j) - theta[j] * y.col(j)).norm();
			if (res > worst) worst = res;
			if (res >= 0.1 * opt.tolerance && first_bad < 0) first_bad = j;
		}
		if (first_bad < 0) {
			// confirm with fresh products
			const Matrix fresh = op(y.leftCols(K));
			r.matvecs += K;
			r.max_residual = 0.0;
			for (Index j = 0; j < K; ++j) {
				r.max_residual = std::max(r.max_residual, (fresh.col(j) - theta[j] * y.col(j)).norm());
			}
			if (r.max_residual < opt.tolerance) {
				r.values = theta.head(K);
				r.vectors = y.leftCols(K);
				return r;
			}
			ay.leftCols(K) = fresh;
			first_bad = 0;
		}
		const Vector residual = ay.col(first_bad) - theta[first_bad] * y.col(first_bad);
		basis.reset(y, ay);
		push(residual);
	}
	throw NumericalError("eig_extreme: no convergence, residual " + std::to_string(worst));
}

inline EigenResult eig_extreme(const SparseMatrix& a, int K, EigenEnd end, const EigenOptions& opt = {}) {
	if (a.rows() != a.cols()) throw InvalidInput("eig_extreme: matrix not square");
	if (a.rows() <= opt.dense_threshold) return detail::select_dense(Matrix(a), K, end);
	return eig_extreme(a.rows(), [&a](const Matrix& x) { return Matrix(a * x); }, K, end, opt);
}

inline EigenResult eig_extreme(const Matrix& a, int K, EigenEnd end, const EigenOptions& opt = {}) {
	if (a.rows() != a.cols()) throw InvalidInput("eig_extreme: matrix not square");
	if (a.rows() <= opt.dense_threshold) return detail::select_dense(a, K, end);
	return eig_extreme(a.rows(), [&a](const Matrix& x) { return Matrix(a * x); }, K, end, opt);
}

namespace detail {
inline bool is_diagonal(const SparseMatrix& b) {
	for (Index i = 0; i < b.outerSize(); ++i) {
		for (SparseMatrix::InnerIterator it(b, i); it; ++it) {
			if (it.col() != i && it.value() != 0.0) return false;
		}
	}
	return true;
}
} // namespace detail

/// Generalized problem a v = lambda b v with b symmetric positive definite after adding
/// `regularization` to its diagonal. Returned vectors are b-orthonormal.
inline EigenResult eig_extreme(const SparseMatrix& a, const SparseMatrix& b, int K, EigenEnd end,
                               const EigenOptions& opt = {}, double regularization = 1e-8) {
	const Index n = a.rows();
	if (a.cols() != n || b.rows() != n || b.cols() != n) throw InvalidInput("eig_extreme: pencil shape mismatch");
	SparseMatrix breg = b;
	for (Index i = 0; i < n; ++i) breg.coeffRef(i, i) += regularization;
	breg.makeCompressed();
	EigenResult r;
	if (detail::is_diagonal(breg)) {
		const Vector d = breg.diagonal();
		if ((d.array() <= 0.0).any()) throw NumericalError("eig_extreme: right-hand side not positive definite");
		const Vector inv_sqrt = d.cwiseSqrt().cwiseInverse();
		const SparseMatrix c = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
		r = eig_extreme(c, K, end, opt);
		r.vectors = inv_sqrt.asDiagonal() * r.vectors;
	} else {
		Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> llt;
		const Eigen::SparseMatrix<double> bc = breg;
		llt.compute(bc);
		if (llt.info() != Eigen::Success) throw NumericalError("eig_extreme: Cholesky of right-hand side failed");
		// llt factors P b P' = L L'; C = L^-1 P a P' L^-T
		const Eigen::SparseMatrix<double> lower = llt.matrixL();
		const auto perm = llt.permutationP();
		auto to_original = [&](const Matrix& y) -> Matrix {
			const Matrix z = lower.transpose().triangularView<Eigen::Upper>().solve(y);
			return perm.inverse() * z;
		};
		auto op = [&](const Matrix& y) -> Matrix {
			const Matrix v = to_original(y);
			const Matrix av = perm * Matrix(a * v);
			return lower.triangularView<Eigen::Lower>().solve(av);
		};
		r = eig_extreme(n, op, K, end, opt);
		r.vectors = to_original(r.vectors);
	}
	r.max_residual = 0.0;
	for (int k = 0; k < K; ++k) {
		const Vector v = r.vectors.col(k);
		r.max_residual = std::max(r.max_residual, (a * v - r.values[k] * (breg * v)).norm() / v.norm());
	}
	return r;
}

} // namespace sssnet
