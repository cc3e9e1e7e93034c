#pragma once

// K-means with k-means++ seeding, Lloyd iterations and restarts.

#include "sssnet/rng.hpp"
#include "sssnet/types.hpp"

#include <limits>
#include <vector>

namespace sssnet {

struct KMeansOptions {
	int restarts = 10;
	int max_iterations = 300;
	double tolerance = 1e-6;
};

struct KMeansResult {
	Labels labels;
	Matrix centers;
	double inertia = 0.0;
	int iterations = 0;
	/// Inertia after each Lloyd step of the winning restart.
	std::vector<double> trace;
};

namespace detail {

inline Matrix kmeanspp_seed(const Matrix& x, int K, Rng& rng) {
	const Index n = x.rows();
	Matrix centers(K, x.cols());
	centers.row(0) = x.row(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
	Vector d2 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
	for (int k = 1; k < K; ++k) {
		const double total = d2.sum();
		Index pick = 0;
		if (total <= 0.0) {
			pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
		} else {
			const double target = rng.uniform() * total;
			double acc = 0.0;
			pick = n - 1;
			for (Index i = 0; i < n; ++i) {
				acc += d2[i];
				if (acc > target) {
					pick = i;
					break;
				}
			}
		}
		centers.row(k) = x.row(pick);
		d2 = d2.cwiseMin((x.rowwise() - centers.row(k)).rowwise().squaredNorm());
	}
	return centers;
}

/// Nearest center per row (lowest index on ties); returns the inertia.
inline double assign(const Matrix& x, const Matrix& centers, Labels& labels, Vector& dist) {
	const Index n = x.rows();
	double inertia = 0.0;
	for (Index i = 0; i < n; ++i) {
		double best = std::numeric_limits<double>::infinity();
		int arg = 0;
		for (Index k = 0; k < centers.rows(); ++k) {
			const double d = (x.row(i) - centers.row(k)).squaredNorm();
			if (d < best) {
				best = d;
				arg = static_cast<int>(k);
			}
		}
		labels[i] = arg;
		dist[i] = best;
		inertia += best;
	}
	return inertia;
}

inline KMeansResult lloyd(const Matrix& x, Matrix centers, const KMeansOptions& opt) {
	const Index n = x.rows();
	const Index K = centers.rows();
	KMeansResult r;
	r.labels.assign(static_cast<std::size_t>(n), 0);
	Vector dist(n);
	double inertia = assign(x, centers, r.labels, dist);
	for (int it = 1; it <= opt.max_iterations; ++it) {
		Matrix sums = Matrix::Zero(K, x.cols());
		std::vector<Index> counts(static_cast<std::size_t>(K), 0);
		for (Index i = 0; i < n; ++i) {
			sums.row(r.labels[i]) += x.row(i);
			++counts[r.labels[i]];
		}
		std::vector<bool> taken(static_cast<std::size_t>(n), false);
		for (Index k = 0; k < K; ++k) {
			if (counts[k] > 0) {
				centers.row(k) = sums.row(k) / static_cast<double>(counts[k]);
				continue;
			}
			// empty cluster: move its center onto the farthest unclaimed point
			Index far = 0;
			double worst = -1.0;
			for (Index i = 0; i < n; ++i) {
				if (!taken[i] && dist[i] > worst) {
					worst = dist[i];
					far = i;
				}
			}
			taken[far] = true;
			centers.row(k) = x.row(far);
		}
		const double next = assign(x, centers, r.labels, dist);
		r.trace.push_back(next);
		r.iterations = it;
		const double change = inertia > 0.0 ? (inertia - next) / inertia : 0.0;
		inertia = next;
		if (inertia == 0.0 || std::abs(change) < opt.tolerance) break;
	}
	r.centers = std::move(centers);
	r.inertia = inertia;
	return r;
}

} // namespace detail

inline KMeansResult kmeans_detailed(const Matrix& points, int K, Rng& rng, const KMeansOptions& opt = {}) {
	if (K < 1 || K > points.rows()) throw InvalidInput("kmeans: need 1 <= K <= number of points");
	if (!points.allFinite()) throw InvalidInput("kmeans: non-finite coordinates");
	KMeansResult best;
	best.inertia = std::numeric_limits<double>::infinity();
	for (int restart = 0; restart < std::max(1, opt.restarts); ++restart) {
		auto r = detail::lloyd(points, detail::kmeanspp_seed(points, K, rng), opt);
		if (r.inertia < best.inertia) best = std::move(r);
	}
	return best;
}

inline Labels kmeans(const Matrix& points, int K, Rng& rng, const KMeansOptions& opt = {}) {
	return kmeans_detailed(points, K, rng, opt).labels;
}

} // namespace sssnet
