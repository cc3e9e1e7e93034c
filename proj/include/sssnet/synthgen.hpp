#pragma once

// Signed stochastic block models (SSBM), polarized SSBMs planted in a signed
// Erdos-Renyi background, and the low-degree densification step.

#include "sssnet/graph.hpp"
#include "sssnet/rng.hpp"

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

namespace sssnet {

struct SsbmParams {
	Index n = 1000;
	int K = 5;
	double p = 0.01;
	double rho = 1.5;
	double eta = 0.0;
	std::uint64_t seed = 0;
};

struct PolSsbmParams {
	Index n = 1050;
	int r = 2;
	double p = 0.1;
	double rho = 1.5;
	double eta = 0.0;
	Index N = 200;
	std::uint64_t seed = 0;
};

struct GeneratorOptions {
	bool restrict_to_lcc = true;
	bool densify = true;
};

struct LabeledGraph {
	SignedGraph graph;
	Labels labels;
	int K = 0;
	/// Planted community sizes (polarized model only), before any LCC restriction.
	std::vector<Index> community_sizes;
};

/// Block sizes with largest/smallest ratio approximately rho; sizes sum to n.
inline std::vector<Index> block_sizes(Index n, int K, double rho) {
	if (K < 1) throw InvalidInput("block_sizes: K must be >= 1");
	if (n < K) throw InvalidInput("block_sizes: n must be >= K");
	if (rho < 1.0) throw InvalidInput("block_sizes: rho must be >= 1");
	std::vector<Index> sizes(static_cast<std::size_t>(K));
	if (K == 1) {
		sizes[0] = n;
		return sizes;
	}
	if (rho == 1.0) {
		const Index base = n / K;
		for (int i = 0; i < K - 1; ++i) sizes[i] = base;
		sizes[K - 1] = n - (K - 1) * base;
		return sizes;
	}
	const double rho0 = std::pow(rho, 1.0 / (K - 1));
	sizes[0] = static_cast<Index>(std::floor(static_cast<double>(n) * (1.0 - rho0) / (1.0 - std::pow(rho0, K))));
	Index used = sizes[0];
	for (int i = 1; i < K - 1; ++i) {
		sizes[i] = static_cast<Index>(std::floor(rho0 * static_cast<double>(sizes[i - 1])));
		used += sizes[i];
	}
	sizes[K - 1] = n - used;
	return sizes;
}

namespace detail {

/// Visits each unordered pair (v, w), w < v < m, independently with probability p,
/// by geometric skipping (Batagelj & Brandes). Exactly one extra uniform draw per visit
/// is left to the callback, so supports stay aligned across runs that vary only signs.
template <typename F>
void for_each_bernoulli_pair(Index m, double p, Rng& rng, F&& visit) {
	if (m < 2 || p <= 0.0) return;
	if (p >= 1.0) {
		for (Index v = 1; v < m; ++v) {
			for (Index w = 0; w < v; ++w) visit(v, w);
		}
		return;
	}
	const double log_q = std::log1p(-p);
	Index v = 1, w = -1;
	for (;;) {
		const double u = rng.uniform();
		w += 1 + static_cast<Index>(std::floor(std::log1p(-u) / log_q));
		while (w >= v && v < m) {
			w -= v;
			++v;
		}
		if (v >= m) return;
		visit(v, w);
	}
}

inline std::vector<Index> permutation(Index n, Rng& rng) {
	std::vector<Index> perm(static_cast<std::size_t>(n));
	std::iota(perm.begin(), perm.end(), Index{0});
	rng.shuffle(std::span<Index>(perm));
	return perm;
}

inline LabeledGraph restrict_to_lcc(const LabeledGraph& lg) {
	auto comp = largest_connected_component(lg.graph);
	LabeledGraph out;
	out.graph = std::move(comp.graph);
	out.K = lg.K;
	out.community_sizes = lg.community_sizes;
	out.labels.reserve(comp.new_to_old.size());
	for (Index old : comp.new_to_old) out.labels.push_back(lg.labels[old]);
	return out;
}

inline void check_ssbm(const SsbmParams& p) {
	if (p.K < 2) throw InvalidInput("SSBM: K must be >= 2");
	if (!(p.p > 0.0 && p.p <= 1.0)) throw InvalidInput("SSBM: p must lie in (0, 1]");
	if (p.rho < 1.0) throw InvalidInput("SSBM: rho must be >= 1");
	if (!(p.eta >= 0.0 && p.eta < 0.5)) throw InvalidInput("SSBM: eta must lie in [0, 0.5)");
}

} // namespace detail

/// Every node of support degree <= 2 gets edges to uniformly drawn non-neighbors until
/// its degree is 3. Added edges carry +1 within a planted cluster and -1 across.
inline LabeledGraph densify_low_degree(const LabeledGraph& lg, std::uint64_t seed) {
	const Index n = lg.graph.size();
	if (n <= 3) return lg;
	if (static_cast<Index>(lg.labels.size()) != n) throw InvalidInput("densify_low_degree: label count mismatch");
	std::vector<std::set<Index>> nbrs(static_cast<std::size_t>(n));
	std::vector<Edge> edges = lg.graph.edges();
	for (const Edge& e : edges) {
		if (e.src == e.dst) continue;
		nbrs[e.src].insert(e.dst);
		nbrs[e.dst].insert(e.src);
	}
	Rng rng(seed);
	for (Index i = 0; i < n; ++i) {
		while (nbrs[i].size() < 3) {
			const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
			if (j == i || nbrs[i].contains(j)) continue;
			nbrs[i].insert(j);
			nbrs[j].insert(i);
			edges.push_back({i, j, lg.labels[i] == lg.labels[j] ? 1.0 : -1.0});
		}
	}
	LabeledGraph out = lg;
	out.graph = build_signed_graph(edges, n, lg.graph.directed());
	return out;
}

inline LabeledGraph sample_ssbm(const SsbmParams& params, const GeneratorOptions& opts = {}) {
	detail::check_ssbm(params);
	Rng rng(params.seed);
	const auto sizes = block_sizes(params.n, params.K, params.rho);
	const auto perm = detail::permutation(params.n, rng);
	LabeledGraph lg;
	lg.K = params.K;
	lg.labels.assign(static_cast<std::size_t>(params.n), 0);
	Index offset = 0;
	for (int b = 0; b < params.K; ++b) {
		for (Index k = 0; k < sizes[b]; ++k) lg.labels[perm[offset + k]] = b;
		offset += sizes[b];
	}
	std::vector<Edge> edges;
	detail::for_each_bernoulli_pair(params.n, params.p, rng, [&](Index v, Index w) {
		double sign = lg.labels[v] == lg.labels[w] ? 1.0 : -1.0;
		if (rng.bernoulli(params.eta)) sign = -sign;
		edges.push_back({w, v, sign});
	});
	lg.graph = build_signed_graph(edges, params.n, false);
	if (opts.restrict_to_lcc) lg = detail::restrict_to_lcc(lg);
	if (opts.densify) lg = densify_low_degree(lg, derive_seed(params.seed, 0xd5));
	return lg;
}

/// Signed Erdos-Renyi graph: each pair is an edge with probability p, sign +-1 with probability 1/2.
inline SignedGraph sample_signed_er(Index n, double p, std::uint64_t seed) {
	if (!(p > 0.0 && p <= 1.0)) throw InvalidInput("signed ER: p must lie in (0, 1]");
	Rng rng(seed);
	std::vector<Edge> edges;
	detail::for_each_bernoulli_pair(n, p, rng, [&](Index v, Index w) {
		edges.push_back({w, v, rng.bernoulli(0.5) ? 1.0 : -1.0});
	});
	return build_signed_graph(edges, n, false);
}

/// Polarized SSBM: r two-block SSBM communities planted on disjoint node sets inside a
/// signed ER background. Labels: ambient 0, community i (1-based) blocks 2i-1 and 2i.
inline LabeledGraph sample_polarized(const PolSsbmParams& params, const GeneratorOptions& opts = {}) {
	if (params.r < 1) throw InvalidInput("Pol-SSBM: r must be >= 1");
	if (params.N * params.r > params.n) throw InvalidInput("Pol-SSBM: N*r exceeds n");
	detail::check_ssbm({params.n, 2, params.p, params.rho, params.eta, params.seed});
	const Index n = params.n;
	Rng rng(params.seed);
	const auto community_sizes = block_sizes(params.N * params.r, params.r, params.rho);
	const auto perm = detail::permutation(n, rng);

	LabeledGraph lg;
	lg.K = 1 + 2 * params.r;
	lg.community_sizes = community_sizes;
	lg.labels.assign(static_cast<std::size_t>(n), 0);
	std::vector<int> community(static_cast<std::size_t>(n), -1);
	std::vector<std::vector<Index>> members(static_cast<std::size_t>(params.r));
	Index offset = 0;
	for (int c = 0; c < params.r; ++c) {
		const auto halves = block_sizes(community_sizes[c], 2, params.rho);
		for (Index k = 0; k < community_sizes[c]; ++k) {
			const Index node = perm[offset + k];
			community[node] = c;
			lg.labels[node] = k < halves[0] ? 2 * c + 1 : 2 * c + 2;
			members[c].push_back(node);
		}
		offset += community_sizes[c];
	}

	std::vector<Edge> edges;
	Rng ambient = rng.split();
	detail::for_each_bernoulli_pair(n, params.p, ambient, [&](Index v, Index w) {
		const bool sign = ambient.bernoulli(0.5);
		// pairs inside one planted community belong to that community's SSBM
		if (community[v] >= 0 && community[v] == community[w]) return;
		edges.push_back({w, v, sign ? 1.0 : -1.0});
	});
	for (int c = 0; c < params.r; ++c) {
		Rng local = rng.split();
		const auto& nodes = members[c];
		detail::for_each_bernoulli_pair(static_cast<Index>(nodes.size()), params.p, local, [&](Index v, Index w) {
			const Index a = nodes[v], b = nodes[w];
			double sign = lg.labels[a] == lg.labels[b] ? 1.0 : -1.0;
			if (local.bernoulli(params.eta)) sign = -sign;
			edges.push_back({a, b, sign});
		});
	}
	lg.graph = build_signed_graph(edges, n, false);
	if (opts.restrict_to_lcc) lg = detail::restrict_to_lcc(lg);
	if (opts.densify) lg = densify_low_degree(lg, derive_seed(params.seed, 0xd5));
	return lg;
}

} // namespace sssnet
