#pragma once

// Spectral baselines for signed graph clustering and the eigenvector input
// features fed to the network.

#include "sssnet/eigen_solver.hpp"
#include "sssnet/graph.hpp"
#include "sssnet/kmeans.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace sssnet {

enum class BaselineMethod { A, sns, dns, L, L_sym, BNC, BRC, SPONGE, SPONGE_sym };

inline constexpr std::array<BaselineMethod, 9> kAllBaselines = {
    BaselineMethod::A,   BaselineMethod::sns, BaselineMethod::dns,    BaselineMethod::L,         BaselineMethod::L_sym,
    BaselineMethod::BNC, BaselineMethod::BRC, BaselineMethod::SPONGE, BaselineMethod::SPONGE_sym};

inline std::string_view to_string(BaselineMethod m) {
	switch (m) {
	case BaselineMethod::A: return "A";
	case BaselineMethod::sns: return "sns";
	case BaselineMethod::dns: return "dns";
	case BaselineMethod::L: return "L";
	case BaselineMethod::L_sym: return "L_sym";
	case BaselineMethod::BNC: return "BNC";
	case BaselineMethod::BRC: return "BRC";
	case BaselineMethod::SPONGE: return "SPONGE";
	case BaselineMethod::SPONGE_sym: return "SPONGE_sym";
	}
	return "?";
}

inline std::optional<BaselineMethod> parse_baseline(std::string_view name) {
	for (auto m : kAllBaselines) {
		if (to_string(m) == name) return m;
	}
	return std::nullopt;
}

inline constexpr double kDegreeRegularization = 1e-8;
inline constexpr double kSpongeTau = 1.0;

/// Operator for one baseline. `rhs` is empty for standard problems. sns and dns are
/// stored literally (not symmetric); `symmetric_form` holds the similar symmetric
/// matrix actually diagonalized, and `back_transform` maps its eigenvectors back.
struct BaselineMatrix {
	SparseMatrix matrix;
	SparseMatrix rhs;
	EigenEnd end = EigenEnd::Smallest;
	SparseMatrix symmetric_form;
	Vector back_transform;

	bool is_pencil() const { return rhs.rows() > 0; }
};

namespace detail {

inline SparseMatrix diag(const Vector& d) {
	SparseMatrix m(d.size(), d.size());
	std::vector<Triplet> t;
	t.reserve(static_cast<std::size_t>(d.size()));
	for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
	m.setFromTriplets(t.begin(), t.end());
	return m;
}

inline SparseMatrix identity(Index n) { return diag(Vector::Ones(n)); }

inline Vector regularized(const Vector& d) {
	Vector out = d;
	for (Index i = 0; i < out.size(); ++i) {
		if (out[i] <= 0.0) out[i] += kDegreeRegularization;
	}
	return out;
}

/// I - D^{-1/2} A D^{-1/2}
inline SparseMatrix sym_laplacian(const SparseMatrix& a, const Vector& d) {
	const Vector s = regularized(d).cwiseSqrt().cwiseInverse();
	SparseMatrix out = identity(a.rows()) - SparseMatrix(s.asDiagonal() * a * s.asDiagonal());
	out.prune(0.0);
	return out;
}

} // namespace detail

inline BaselineMatrix baseline_matrix(const SignedGraph& graph, BaselineMethod tag) {
	const SignedGraph sym = graph.directed() ? symmetrize(graph) : graph;
	const SparseMatrix& a = sym.adjacency();
	const Index n = a.rows();
	const DegreeSet d = degrees(sym);
	const Vector dbar = detail::regularized(d.total);
	const SparseMatrix I = detail::identity(n);
	BaselineMatrix out;
	switch (tag) {
	case BaselineMethod::A:
		out.matrix = a;
		out.end = EigenEnd::Largest;
		break;
	case BaselineMethod::L:
		out.matrix = detail::diag(d.total) - a;
		break;
	case BaselineMethod::L_sym:
		out.matrix = detail::sym_laplacian(a, d.total);
		break;
	case BaselineMethod::BRC:
		out.matrix = detail::diag(d.pos) - a;
		break;
	case BaselineMethod::BNC: {
		const Vector s = dbar.cwiseSqrt().cwiseInverse();
		out.matrix = s.asDiagonal() * (detail::diag(d.pos) - a) * s.asDiagonal();
		break;
	}
	case BaselineMethod::dns: {
		const Vector inv = dbar.cwiseInverse();
		out.matrix = inv.asDiagonal() * (detail::diag(d.pos) - a);
		const Vector s = dbar.cwiseSqrt().cwiseInverse();
		out.symmetric_form = s.asDiagonal() * (detail::diag(d.pos) - a) * s.asDiagonal();
		out.back_transform = s;
		break;
	}
	case BaselineMethod::sns: {
		// Dbar^-1 (D+ - D- A) = Delta - S A with Delta = Dbar^-1 D+, S = Dbar^-1 D-.
		const Vector delta = d.pos.cwiseQuotient(dbar);
		const Vector s = detail::regularized(d.neg.cwiseQuotient(dbar));
		out.matrix = detail::diag(delta) - SparseMatrix(d.neg.cwiseQuotient(dbar).asDiagonal() * a);
		const Vector root = s.cwiseSqrt();
		out.symmetric_form = detail::diag(delta) - SparseMatrix(root.asDiagonal() * a * root.asDiagonal());
		out.back_transform = root;
		break;
	}
	case BaselineMethod::SPONGE: {
		const SignDecomposition parts = decompose(a);
		const SparseMatrix lpos = detail::diag(d.pos) - parts.pos;
		const SparseMatrix lneg = detail::diag(d.neg) - parts.neg;
		out.matrix = lpos + kSpongeTau * detail::diag(d.neg);
		out.rhs = lneg + kSpongeTau * detail::diag(d.pos);
		break;
	}
	case BaselineMethod::SPONGE_sym: {
		const SignDecomposition parts = decompose(a);
		out.matrix = detail::sym_laplacian(parts.pos, d.pos) + kSpongeTau * I;
		out.rhs = detail::sym_laplacian(parts.neg, d.neg) + kSpongeTau * I;
		break;
	}
	}
	out.matrix.prune(0.0);
	out.matrix.makeCompressed();
	return out;
}

inline EigenResult baseline_eigen(const SignedGraph& graph, BaselineMethod tag, int K, const EigenOptions& opt = {}) {
	const BaselineMatrix bm = baseline_matrix(graph, tag);
	if (bm.is_pencil()) return eig_extreme(bm.matrix, bm.rhs, K, bm.end, opt, kDegreeRegularization);
	if (bm.back_transform.size() > 0) {
		EigenResult r = eig_extreme(bm.symmetric_form, K, bm.end, opt);
		r.vectors = bm.back_transform.asDiagonal() * r.vectors;
		for (int k = 0; k < K; ++k) r.vectors.col(k).normalize();
		return r;
	}
	return eig_extreme(bm.matrix, K, bm.end, opt);
}

/// Symmetrize, take the K extreme eigenvectors as node coordinates, cluster with k-means.
inline Labels baseline_cluster(const SignedGraph& graph, int K, BaselineMethod tag, Rng& rng) {
	if (K < 1 || K > graph.size()) throw InvalidInput("baseline_cluster: need 1 <= K <= n");
	EigenOptions opt;
	opt.seed = rng.next();
	const EigenResult r = baseline_eigen(graph, tag, K, opt);
	return kmeans(r.vectors, K, rng);
}

enum class FeatureMode { Synthetic, Real };

/// Synthetic: top-K eigenvectors of (A + A')/2 scaled by their eigenvalues.
/// Real: bottom-K eigenvectors of the normalized signed Laplacian divided by their eigenvalues.
inline Matrix input_features(const SignedGraph& graph, int K, FeatureMode mode, std::uint64_t seed = 0x5eed) {
	if (K < 1) throw InvalidInput("input_features: K must be >= 1");
	if (K > graph.size()) throw InvalidInput("input_features: K exceeds node count");
	const SignedGraph sym = graph.directed() ? symmetrize(graph) : graph;
	EigenOptions opt;
	opt.seed = seed;
	if (mode == FeatureMode::Synthetic) {
		EigenResult r = eig_extreme(sym.adjacency(), K, EigenEnd::Largest, opt);
		return r.vectors * r.values.asDiagonal();
	}
	const SparseMatrix lsym = detail::sym_laplacian(sym.adjacency(), degrees(sym).total);
	EigenResult r = eig_extreme(lsym, K, EigenEnd::Smallest, opt);
	Vector divisor = r.values;
	for (Index k = 0; k < divisor.size(); ++k) {
		if (std::abs(divisor[k]) < kDegreeRegularization) divisor[k] = kDegreeRegularization;
	}
	return r.vectors * divisor.cwiseInverse().asDiagonal();
}

} // namespace sssnet
