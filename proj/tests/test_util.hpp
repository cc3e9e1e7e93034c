#pragma once

#include "sssnet/graph.hpp"
#include "sssnet/rng.hpp"

#include <vector>

namespace testutil {

using namespace sssnet;

/// Random signed graph: each ordered (directed) or unordered pair is an edge with
/// probability p, weight magnitude in [0.5, 2), sign +- with equal odds.
inline SignedGraph random_signed_graph(Index n, double p, bool directed, Rng& rng, bool unit = false) {
	std::vector<Edge> edges;
	for (Index i = 0; i < n; ++i) {
		for (Index j = directed ? 0 : i + 1; j < n; ++j) {
			if (i == j || !rng.bernoulli(p)) continue;
			const double mag = unit ? 1.0 : rng.uniform(0.5, 2.0);
			edges.push_back({i, j, rng.bernoulli(0.5) ? mag : -mag});
		}
	}
	return build_signed_graph(edges, n, directed);
}

inline Matrix random_matrix(Index r, Index c, Rng& rng, double scale = 1.0) {
	Matrix m(r, c);
	for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
	return m;
}

/// The 4-node hand instance: +(0,1), +(2,3), -(0,2); clusters {0,1} and {2,3}.
inline SignedGraph hand_graph(bool flip_01) {
	std::vector<Edge> edges{{0, 1, flip_01 ? -1.0 : 1.0}, {2, 3, 1.0}, {0, 2, -1.0}};
	return build_signed_graph(edges, 4, false);
}

inline Matrix one_hot(const Labels& labels, int K) {
	Matrix p = Matrix::Zero(static_cast<Index>(labels.size()), K);
	for (std::size_t i = 0; i < labels.size(); ++i) p(static_cast<Index>(i), labels[i]) = 1.0;
	return p;
}

} // namespace testutil
