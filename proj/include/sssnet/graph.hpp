#pragma once

// Sparse signed graphs: construction, sign decomposition, self-loop row
// normalization, symmetrization and connectivity.

#include "sssnet/types.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sssnet {

struct Edge {
	Index src = 0;
	Index dst = 0;
	double weight = 0.0;

	friend bool operator==(const Edge&, const Edge&) = default;
};

/// Weighted signed graph stored as a compressed row adjacency matrix.
/// Immutable after construction. Undirected graphs keep both (i,j) and (j,i).
class SignedGraph {
  public:
	SignedGraph() = default;

	SignedGraph(SparseMatrix adjacency, bool directed) : m_adj(std::move(adjacency)), m_directed(directed) {
		if (m_adj.rows() != m_adj.cols()) throw InvalidInput("adjacency matrix must be square");
		m_adj.makeCompressed();
		for (Index i = 0; i < m_adj.outerSize(); ++i) {
			for (SparseMatrix::InnerIterator it(m_adj, i); it; ++it) {
				if (it.value() == 0.0) throw InvalidInput("stored edge weight is zero");
			}
		}
		if (!m_directed) {
			const SparseMatrix diff = SparseMatrix(m_adj.transpose()) - m_adj;
			for (Index i = 0; i < diff.outerSize(); ++i) {
				for (SparseMatrix::InnerIterator it(diff, i); it; ++it) {
					if (it.value() != 0.0) throw InvalidInput("undirected graph with asymmetric adjacency");
				}
			}
		}
	}

	Index size() const { return m_adj.rows(); }
	bool directed() const { return m_directed; }
	const SparseMatrix& adjacency() const { return m_adj; }

	/// Stored nonzeros; for undirected graphs each pair appears once with src <= dst.
	std::vector<Edge> edges() const {
		std::vector<Edge> out;
		out.reserve(static_cast<std::size_t>(m_adj.nonZeros()));
		for (Index i = 0; i < m_adj.outerSize(); ++i) {
			for (SparseMatrix::InnerIterator it(m_adj, i); it; ++it) {
				if (!m_directed && it.col() < i) continue;
				out.push_back({i, it.col(), it.value()});
			}
		}
		return out;
	}

	Index edge_count() const {
		if (m_directed) return m_adj.nonZeros();
		Index count = 0;
		for (Index i = 0; i < m_adj.outerSize(); ++i) {
			for (SparseMatrix::InnerIterator it(m_adj, i); it; ++it) {
				if (it.col() >= i) ++count;
			}
		}
		return count;
	}

	double weight(Index i, Index j) const { return m_adj.coeff(i, j); }

  private:
	SparseMatrix m_adj;
	bool m_directed = false;
};

struct SignDecomposition {
	SparseMatrix pos;
	SparseMatrix neg;
};

struct DegreeSet {
	Vector pos;
	Vector neg;
	Vector total;
};

/// Row-normalized positive/negative channels for source (A) and target (A^T) directions.
struct NormalizedChannels {
	SparseMatrix s_pos;
	SparseMatrix s_neg;
	SparseMatrix t_pos;
	SparseMatrix t_neg;
	double tau_pos = 0.5;
	double tau_neg = 0.0;
};

struct ComponentResult {
	SignedGraph graph;
	/// old id -> new id, -1 for nodes outside the component.
	std::vector<Index> old_to_new;
	/// new id -> old id.
	std::vector<Index> new_to_old;
};

inline SignedGraph build_signed_graph(std::span<const Edge> edges, Index n, bool directed) {
	if (n < 0) throw InvalidInput("negative node count");
	struct PairHash {
		std::size_t operator()(const std::pair<Index, Index>& p) const noexcept {
			return std::hash<Index>()(p.first) * 1000003u ^ std::hash<Index>()(p.second);
		}
	};
	std::unordered_set<std::pair<Index, Index>, PairHash> seen;
	seen.reserve(edges.size() * 2);
	std::vector<Triplet> triplets;
	triplets.reserve(edges.size() * (directed ? 1 : 2));
	for (const Edge& e : edges) {
		if (e.src < 0 || e.src >= n || e.dst < 0 || e.dst >= n) {
			throw InvalidInput("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
			                   ") out of range for n=" + std::to_string(n));
		}
		if (e.weight == 0.0) {
			throw InvalidInput("zero-weight edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
		}
		auto key = directed ? std::pair{e.src, e.dst} : std::pair{std::min(e.src, e.dst), std::max(e.src, e.dst)};
		if (!seen.insert(key).second) {
			throw InvalidInput("duplicate edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) + ")");
		}
		triplets.emplace_back(e.src, e.dst, e.weight);
		if (!directed && e.src != e.dst) triplets.emplace_back(e.dst, e.src, e.weight);
	}
	SparseMatrix adj(n, n);
	adj.setFromTriplets(triplets.begin(), triplets.end());
	return SignedGraph(std::move(adj), directed);
}

inline SignDecomposition decompose(const SparseMatrix& a) {
	SparseMatrix pos = a.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
	SparseMatrix neg = a.unaryExpr([](double v) { return v < 0.0 ? -v : 0.0; });
	pos.prune([](Index, Index, double v) { return v != 0.0; });
	neg.prune([](Index, Index, double v) { return v != 0.0; });
	return {std::move(pos), std::move(neg)};
}

inline SignDecomposition decompose(const SignedGraph& graph) { return decompose(graph.adjacency()); }

inline DegreeSet degrees(const SparseMatrix& a) {
	DegreeSet d{Vector::Zero(a.rows()), Vector::Zero(a.rows()), Vector::Zero(a.rows())};
	for (Index i = 0; i < a.outerSize(); ++i) {
		for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
			if (it.value() > 0.0) d.pos[i] += it.value();
			else d.neg[i] -= it.value();
		}
	}
	d.total = d.pos + d.neg;
	return d;
}

inline DegreeSet degrees(const SignedGraph& graph) { return degrees(graph.adjacency()); }

/// (D~)^{-1} (M + tau I). Rows of zero total mass stay zero.
inline SparseMatrix row_normalize(const SparseMatrix& part, double tau) {
	if (tau < 0.0) throw InvalidInput("row_normalize: tau must be nonnegative");
	if (part.rows() != part.cols()) throw InvalidInput("row_normalize: matrix must be square");
	const Index n = part.rows();
	std::vector<Triplet> triplets;
	triplets.reserve(static_cast<std::size_t>(part.nonZeros() + n));
	for (Index i = 0; i < n; ++i) {
		double total = tau;
		bool has_diag = false;
		for (SparseMatrix::InnerIterator it(part, i); it; ++it) {
			if (it.value() < 0.0) throw InvalidInput("row_normalize: matrix must be nonnegative");
			total += it.value();
			has_diag |= it.col() == i;
		}
		if (total == 0.0) continue;
		for (SparseMatrix::InnerIterator it(part, i); it; ++it) {
			const double v = it.value() + (it.col() == i ? tau : 0.0);
			if (v != 0.0) triplets.emplace_back(i, it.col(), v / total);
		}
		if (!has_diag && tau > 0.0) triplets.emplace_back(i, i, tau / total);
	}
	SparseMatrix out(n, n);
	out.setFromTriplets(triplets.begin(), triplets.end());
	return out;
}

inline NormalizedChannels normalized_channels(const SignedGraph& graph, double tau_pos = 0.5, double tau_neg = 0.0) {
	const SignDecomposition parts = decompose(graph);
	NormalizedChannels c;
	c.tau_pos = tau_pos;
	c.tau_neg = tau_neg;
	c.s_pos = row_normalize(parts.pos, tau_pos);
	c.s_neg = row_normalize(parts.neg, tau_neg);
	if (graph.directed()) {
		c.t_pos = row_normalize(SparseMatrix(parts.pos.transpose()), tau_pos);
		c.t_neg = row_normalize(SparseMatrix(parts.neg.transpose()), tau_neg);
	} else {
		c.t_pos = c.s_pos;
		c.t_neg = c.s_neg;
	}
	return c;
}

/// A* = (A + A^T)/2; entries cancelling to exactly zero leave the support.
inline SignedGraph symmetrize(const SignedGraph& graph) {
	const SparseMatrix& a = graph.adjacency();
	SparseMatrix sym = 0.5 * (a + SparseMatrix(a.transpose()));
	sym.prune([](Index, Index, double v) { return v != 0.0; });
	return SignedGraph(std::move(sym), false);
}

/// Subgraph induced by `nodes`; node k of the result is nodes[k].
inline SignedGraph induced_subgraph(const SignedGraph& graph, std::span<const Index> nodes) {
	const Index n = graph.size();
	std::vector<Index> remap(static_cast<std::size_t>(n), -1);
	for (std::size_t k = 0; k < nodes.size(); ++k) {
		const Index v = nodes[k];
		if (v < 0 || v >= n) throw InvalidInput("induced_subgraph: node id out of range");
		if (remap[static_cast<std::size_t>(v)] != -1) throw InvalidInput("induced_subgraph: repeated node id");
		remap[static_cast<std::size_t>(v)] = static_cast<Index>(k);
	}
	const SparseMatrix& a = graph.adjacency();
	std::vector<Triplet> triplets;
	for (std::size_t k = 0; k < nodes.size(); ++k) {
		for (SparseMatrix::InnerIterator it(a, nodes[k]); it; ++it) {
			const Index j = remap[static_cast<std::size_t>(it.col())];
			if (j >= 0) triplets.emplace_back(static_cast<Index>(k), j, it.value());
		}
	}
	const auto m = static_cast<Index>(nodes.size());
	SparseMatrix sub(m, m);
	sub.setFromTriplets(triplets.begin(), triplets.end());
	return SignedGraph(std::move(sub), graph.directed());
}

/// Weakly connected component labels on the unsigned, undirected support.
/// Returns per-node component id; ids are assigned in order of smallest member.
inline std::vector<Index> weak_components(const SignedGraph& graph) {
	const Index n = graph.size();
	std::vector<Index> parent(static_cast<std::size_t>(n));
	std::iota(parent.begin(), parent.end(), Index{0});
	auto find = [&](Index x) {
		while (parent[x] != x) {
			parent[x] = parent[parent[x]];
			x = parent[x];
		}
		return x;
	};
	const SparseMatrix& a = graph.adjacency();
	for (Index i = 0; i < n; ++i) {
		for (SparseMatrix::InnerIterator it(a, i); it; ++it) {
			Index ri = find(i), rj = find(it.col());
			if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
		}
	}
	std::vector<Index> comp(static_cast<std::size_t>(n), -1);
	std::vector<Index> root_id(static_cast<std::size_t>(n), -1);
	Index next = 0;
	for (Index i = 0; i < n; ++i) {
		const Index r = find(i);
		if (root_id[r] < 0) root_id[r] = next++;
		comp[i] = root_id[r];
	}
	return comp;
}

inline Index component_count(const SignedGraph& graph) {
	const auto comp = weak_components(graph);
	return comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;
}

/// Largest weakly connected component; ties go to the component holding the smallest node id.
inline ComponentResult largest_connected_component(const SignedGraph& graph) {
	const Index n = graph.size();
	if (n == 0) throw InvalidInput("largest_connected_component: empty graph");
	const auto comp = weak_components(graph);
	const Index count = *std::max_element(comp.begin(), comp.end()) + 1;
	std::vector<Index> sizes(static_cast<std::size_t>(count), 0);
	for (Index c : comp) ++sizes[c];
	// component ids are ordered by smallest member, so the first maximum wins ties
	const Index best = std::max_element(sizes.begin(), sizes.end()) - sizes.begin();
	ComponentResult r;
	r.old_to_new.assign(static_cast<std::size_t>(n), -1);
	for (Index i = 0; i < n; ++i) {
		if (comp[i] == best) {
			r.old_to_new[i] = static_cast<Index>(r.new_to_old.size());
			r.new_to_old.push_back(i);
		}
	}
	r.graph = induced_subgraph(graph, r.new_to_old);
	return r;
}

/// Unweighted neighbor count (self-loops excluded) on the undirected support.
inline std::vector<Index> support_degrees(const SignedGraph& graph) {
	const SparseMatrix& a = graph.adjacency();
	std::vector<Index> deg(static_cast<std::size_t>(graph.size()), 0);
	if (graph.directed()) {
		const SparseMatrix support = symmetrize(SignedGraph(a.cwiseAbs(), true)).adjacency();
		for (Index i = 0; i < support.outerSize(); ++i) {
			for (SparseMatrix::InnerIterator it(support, i); it; ++it) deg[i] += it.col() != i;
		}
		return deg;
	}
	for (Index i = 0; i < a.outerSize(); ++i) {
		for (SparseMatrix::InnerIterator it(a, i); it; ++it) deg[i] += it.col() != i;
	}
	return deg;
}

} // namespace sssnet
