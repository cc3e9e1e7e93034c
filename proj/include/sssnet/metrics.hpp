#pragma once

// Partition agreement (ARI, NMI) and structural scores of a labeling on a signed
// graph (unhappy-edge ratio, balanced normalized cut, unbalanced triangles).

#include "sssnet/graph.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace sssnet {

struct Contingency {
	std::vector<std::vector<std::int64_t>> counts;
	std::vector<std::int64_t> row_sums;
	std::vector<std::int64_t> col_sums;
	std::int64_t total = 0;
};

inline Contingency contingency(std::span<const int> a, std::span<const int> b) {
	if (a.size() != b.size()) throw InvalidInput("labelings differ in length");
	// compact ids so sparse label values do not blow up the table
	std::map<int, std::size_t> ia, ib;
	for (int x : a) ia.emplace(x, ia.size());
	for (int x : b) ib.emplace(x, ib.size());
	Contingency c;
	c.counts.assign(ia.size(), std::vector<std::int64_t>(ib.size(), 0));
	c.row_sums.assign(ia.size(), 0);
	c.col_sums.assign(ib.size(), 0);
	for (std::size_t i = 0; i < a.size(); ++i) {
		const auto r = ia.at(a[i]), s = ib.at(b[i]);
		++c.counts[r][s];
		++c.row_sums[r];
		++c.col_sums[s];
	}
	c.total = static_cast<std::int64_t>(a.size());
	return c;
}

namespace detail {
inline double choose2(std::int64_t x) { return 0.5 * static_cast<double>(x) * static_cast<double>(x - 1); }
} // namespace detail

/// Adjusted Rand Index (Hubert & Arabie).
inline double ari(std::span<const int> a, std::span<const int> b) {
	if (a.size() != b.size()) throw InvalidInput("ari: labelings differ in length");
	if (a.size() < 2) throw InvalidInput("ari: need at least two items");
	const Contingency c = contingency(a, b);
	double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
	for (const auto& row : c.counts) {
		for (auto v : row) sum_cells += detail::choose2(v);
	}
	for (auto v : c.row_sums) sum_rows += detail::choose2(v);
	for (auto v : c.col_sums) sum_cols += detail::choose2(v);
	const double expected = sum_rows * sum_cols / detail::choose2(c.total);
	const double max_index = 0.5 * (sum_rows + sum_cols);
	if (max_index - expected == 0.0) {
		// both partitions trivial (all-in-one or all-singletons)
		return c.row_sums.size() == c.col_sums.size() ? 1.0 : 0.0;
	}
	return (sum_cells - expected) / (max_index - expected);
}

/// Normalized mutual information with geometric-mean normalization.
inline double nmi(std::span<const int> a, std::span<const int> b) {
	if (a.size() != b.size()) throw InvalidInput("nmi: labelings differ in length");
	if (a.empty()) throw InvalidInput("nmi: empty labelings");
	const Contingency c = contingency(a, b);
	const double n = static_cast<double>(c.total);
	auto entropy = [n](const std::vector<std::int64_t>& sums) {
		double h = 0.0;
		for (auto v : sums) {
			if (v > 0) h -= (v / n) * std::log(v / n);
		}
		return h;
	};
	const double ha = entropy(c.row_sums), hb = entropy(c.col_sums);
	if (ha <= 0.0 || hb <= 0.0) return (ha <= 0.0 && hb <= 0.0) ? 1.0 : 0.0;
	double mi = 0.0;
	for (std::size_t r = 0; r < c.counts.size(); ++r) {
		for (std::size_t s = 0; s < c.counts[r].size(); ++s) {
			const auto v = c.counts[r][s];
			if (v == 0) continue;
			const double pij = v / n;
			mi += pij * std::log(pij / ((c.row_sums[r] / n) * (c.col_sums[s] / n)));
		}
	}
	return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

inline std::vector<int> subset_labels(const Labels& labels, std::span<const Index> nodes) {
	std::vector<int> out;
	out.reserve(nodes.size());
	for (Index v : nodes) out.push_back(labels[v]);
	return out;
}

/// Fraction of edges violating their expected sign: positive across clusters or negative within.
inline double unhappy_ratio(const SignedGraph& graph, std::span<const int> labels) {
	if (static_cast<Index>(labels.size()) != graph.size()) throw InvalidInput("unhappy_ratio: label count mismatch");
	std::int64_t total = 0, unhappy = 0;
	for (const Edge& e : graph.edges()) {
		++total;
		const bool same = labels[e.src] == labels[e.dst];
		if ((e.weight > 0.0) != same) ++unhappy;
	}
	if (total == 0) throw InvalidInput("unhappy_ratio: graph has no edges");
	return static_cast<double>(unhappy) / static_cast<double>(total);
}

/// Balanced normalized cut of a hard labeling: sum_k x_k'(D+ - A)x_k / x_k' Dbar x_k.
inline double bnc_value(const SignedGraph& graph, std::span<const int> labels, int K = -1) {
	const Index n = graph.size();
	if (static_cast<Index>(labels.size()) != n) throw InvalidInput("bnc_value: label count mismatch");
	for (int l : labels) {
		if (l < 0) throw InvalidInput("bnc_value: negative label");
		K = std::max(K, l + 1);
	}
	const DegreeSet d = degrees(graph);
	std::vector<double> num(static_cast<std::size_t>(K), 0.0), den(static_cast<std::size_t>(K), 0.0);
	for (Index i = 0; i < n; ++i) {
		num[labels[i]] += d.pos[i];
		den[labels[i]] += d.total[i];
	}
	const SparseMatrix& a = graph.adjacency();
	for (Index i = 0; i < n; ++i) {
		for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
			if (labels[i] == labels[it.col()]) num[labels[i]] -= it.value();
		}
	}
	double total = 0.0;
	for (int k = 0; k < K; ++k) {
		if (den[k] > 0.0) total += num[k] / den[k];
	}
	return total;
}

struct TriangleStats {
	std::uint64_t unbalanced = 0;
	std::uint64_t total = 0;
	/// unbalanced / total, 0 when the graph has no triangles.
	double violation_ratio = 0.0;
	bool defined = false;
};

/// Triangles on the sign pattern of (A + A^T)/2, self-loops excluded. A triangle is
/// unbalanced when it carries an odd number of negative edges.
inline TriangleStats count_unbalanced_triangles(const SignedGraph& graph) {
	const SignedGraph sym = graph.directed() ? symmetrize(graph) : graph;
	const SparseMatrix& a = sym.adjacency();
	const Index n = a.rows();
	// forward adjacency: neighbors with larger id, sorted (row-major storage is sorted)
	std::vector<std::vector<std::pair<Index, int>>> fwd(static_cast<std::size_t>(n));
	for (Index i = 0; i < n; ++i) {
		for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
			if (it.col() > i) fwd[i].emplace_back(it.col(), it.value() > 0.0 ? 1 : -1);
		}
	}
	TriangleStats s;
	for (Index u = 0; u < n; ++u) {
		for (const auto& [v, suv] : fwd[u]) {
			// intersect fwd[u] and fwd[v] (both sorted); w > v > u
			const auto& lu = fwd[u];
			const auto& lv = fwd[v];
			std::size_t p = 0, q = 0;
			while (p < lu.size() && q < lv.size()) {
				if (lu[p].first < lv[q].first) ++p;
				else if (lu[p].first > lv[q].first) ++q;
				else {
					if (lu[p].first > v) {
						++s.total;
						if (suv * lu[p].second * lv[q].second < 0) ++s.unbalanced;
					}
					++p;
					++q;
				}
			}
		}
	}
	s.defined = s.total > 0;
	s.violation_ratio = s.defined ? static_cast<double>(s.unbalanced) / static_cast<double>(s.total) : 0.0;
	return s;
}

} // namespace sssnet
