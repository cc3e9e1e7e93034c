#pragma once

// The SSSNET network: four bias-free two-layer MLPs, signed mixed-path
// aggregation (SIMPA) over the normalized channels, and a linear softmax head.
//
// Channel order is fixed everywhere: 0 source-positive, 1 source-negative,
// 2 target-positive, 3 target-negative. Undirected models only carry 0 and 1.

#include "sssnet/graph.hpp"
#include "sssnet/rng.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sssnet {

enum Channel : int { SourcePos = 0, SourceNeg = 1, TargetPos = 2, TargetNeg = 3 };

inline constexpr double kDropoutProbability = 0.5;

struct ModelShape {
	Index d_in = 1;
	Index hidden = 32;
	int K = 2;
	int hop = 2;
	bool directed = false;
	/// Adds a learnable two-negative-hop friend term per friend channel (h = 2 only).
	bool balance_variant = false;

	int channel_count() const { return directed ? 4 : 2; }
	Index embedding_dim() const { return channel_count() * hidden; }
	friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// (friend weight count, enemy weight count) for hop h: (h+1, h(h+1)/2).
inline std::pair<int, int> channel_counts(int hop) {
	if (hop < 0) throw InvalidInput("hop must be nonnegative");
	return {hop + 1, hop * (hop + 1) / 2};
}

/// (h1, h2) exponents of the enemy terms (A+)^h1 A- (A+)^h2 in weight-list order:
/// h2 ascending in the outer loop, h1 ascending in the inner loop, h1 + h2 <= h - 1.
inline std::vector<std::pair<int, int>> enemy_exponents(int hop) {
	std::vector<std::pair<int, int>> out;
	for (int h2 = 0; h2 < hop; ++h2) {
		for (int h1 = 0; h1 + h2 <= hop - 1; ++h1) out.emplace_back(h1, h2);
	}
	return out;
}

inline bool is_friend_channel(int c) { return c == SourcePos || c == TargetPos; }

struct MlpStack {
	Matrix w1; // d_in x d
	Matrix w2; // d x d
};

/// Parameter (or gradient) storage. Models and gradient tapes share this layout.
struct ParameterSet {
	std::vector<MlpStack> mlp;
	std::vector<Vector> omega;
	Vector balance;
	Matrix head_w;
	Vector head_b;

	static ParameterSet zeros(const ModelShape& s) {
		ParameterSet p;
		const auto [nf, ne] = channel_counts(s.hop);
		for (int c = 0; c < s.channel_count(); ++c) {
			p.mlp.push_back({Matrix::Zero(s.d_in, s.hidden), Matrix::Zero(s.hidden, s.hidden)});
			p.omega.push_back(Vector::Zero(is_friend_channel(c) ? nf : ne));
		}
		p.balance = Vector::Zero(s.balance_variant ? s.channel_count() / 2 : 0);
		p.head_w = Matrix::Zero(s.embedding_dim(), s.K);
		p.head_b = Vector::Zero(s.K);
		return p;
	}

	std::vector<std::span<double>> blocks() {
		std::vector<std::span<double>> out;
		for (auto& m : mlp) {
			out.emplace_back(m.w1.data(), static_cast<std::size_t>(m.w1.size()));
			out.emplace_back(m.w2.data(), static_cast<std::size_t>(m.w2.size()));
		}
		for (auto& w : omega) out.emplace_back(w.data(), static_cast<std::size_t>(w.size()));
		out.emplace_back(balance.data(), static_cast<std::size_t>(balance.size()));
		out.emplace_back(head_w.data(), static_cast<std::size_t>(head_w.size()));
		out.emplace_back(head_b.data(), static_cast<std::size_t>(head_b.size()));
		return out;
	}

	std::vector<std::string> block_names() const {
		static constexpr std::array<const char*, 4> tag{"sp", "sn", "tp", "tn"};
		std::vector<std::string> out;
		for (std::size_t c = 0; c < mlp.size(); ++c) {
			out.push_back(std::string("mlp_") + tag[c] + ".w1");
			out.push_back(std::string("mlp_") + tag[c] + ".w2");
		}
		for (std::size_t c = 0; c < omega.size(); ++c) out.push_back(std::string("omega_") + tag[c]);
		out.push_back("balance");
		out.push_back("head.w");
		out.push_back("head.b");
		return out;
	}

	Index size() const {
		Index total = balance.size() + head_w.size() + head_b.size();
		for (const auto& m : mlp) total += m.w1.size() + m.w2.size();
		for (const auto& w : omega) total += w.size();
		return total;
	}
};

struct SimpaModel {
	ModelShape shape;
	ParameterSet params;

	Index parameter_count() const { return params.size(); }
};

using GradientTape = ParameterSet;

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); all path weights start at 1.
inline SimpaModel init_model(const ModelShape& shape, std::uint64_t seed) {
	if (shape.d_in < 1 || shape.hidden < 1 || shape.K < 1) throw InvalidInput("init_model: dimensions must be >= 1");
	if (shape.hop < 0) throw InvalidInput("init_model: hop must be >= 0");
	if (shape.balance_variant && shape.hop != 2) throw InvalidInput("balance variant requires hop = 2");
	SimpaModel m{shape, ParameterSet::zeros(shape)};
	Rng rng(seed);
	auto fill = [&](auto& mat, Index fan_in) {
		const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
		for (Index i = 0; i < mat.size(); ++i) mat.data()[i] = rng.uniform(-bound, bound);
	};
	for (auto& s : m.params.mlp) {
		fill(s.w1, shape.d_in);
		fill(s.w2, shape.hidden);
	}
	for (auto& w : m.params.omega) w.setOnes();
	m.params.balance.setOnes();
	fill(m.params.head_w, shape.embedding_dim());
	fill(m.params.head_b, shape.embedding_dim());
	return m;
}

// ---------------------------------------------------------------------------
// MLP

struct MlpCache {
	Matrix pre;    // X W1
	Matrix mask;   // dropout scale per entry (0 or 1/keep); empty in eval mode
	Matrix hidden; // dropout(relu(pre))
};

/// layer1 -> ReLU -> dropout (training only, inverted scaling) -> layer2. No biases.
/// A non-empty `fixed_mask` replaces the sampled dropout mask.
inline Matrix mlp_forward(const Matrix& x, const MlpStack& stack, bool training, Rng* rng = nullptr,
                          MlpCache* cache = nullptr, const Matrix* fixed_mask = nullptr) {
	if (x.cols() != stack.w1.rows() || stack.w1.cols() != stack.w2.rows()) {
		throw InvalidInput("mlp_forward: dimension mismatch");
	}
	Matrix pre = x * stack.w1;
	Matrix hidden = pre.cwiseMax(0.0);
	Matrix mask;
	if (training) {
		if (fixed_mask != nullptr) {
			mask = *fixed_mask;
		} else {
			if (rng == nullptr) throw InvalidInput("mlp_forward: training mode needs an rng");
			const double keep = 1.0 - kDropoutProbability;
			mask.resize(pre.rows(), pre.cols());
			for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
		}
		hidden.array() *= mask.array();
	}
	Matrix out = hidden * stack.w2;
	if (cache != nullptr) *cache = {std::move(pre), std::move(mask), std::move(hidden)};
	return out;
}

inline void mlp_backward(const Matrix& x, const MlpStack& stack, const MlpCache& cache, const Matrix& d_out,
                         MlpStack& grad) {
	grad.w2 += cache.hidden.transpose() * d_out;
	Matrix d_hidden = d_out * stack.w2.transpose();
	if (cache.mask.size() > 0) d_hidden.array() *= cache.mask.array();
	d_hidden.array() *= (cache.pre.array() > 0.0).cast<double>();
	grad.w1 += x.transpose() * d_hidden;
}

// ---------------------------------------------------------------------------
// SIMPA

/// Records the dense buffers created during aggregation.
struct WorkspaceProbe {
	Index buffers = 0;
	Index total_elements = 0;
	Index largest_buffer = 0;

	void note(const Matrix& m) {
		++buffers;
		total_elements += m.size();
		largest_buffer = std::max(largest_buffer, m.size());
	}
};

/// Per-channel propagated terms kept for the backward pass, in weight-list order.
struct SimpaCache {
	std::vector<std::vector<Matrix>> terms;
	std::vector<Matrix> balance_terms;
};

namespace detail {

inline const SparseMatrix& channel_matrix(const NormalizedChannels& ch, int c) {
	switch (c) {
	case SourcePos: return ch.s_pos;
	case SourceNeg: return ch.s_neg;
	case TargetPos: return ch.t_pos;
	default: return ch.t_neg;
	}
}

inline void check_simpa_inputs(const NormalizedChannels& ch, std::span<const Matrix> hidden, const SimpaModel& model) {
	const auto& s = model.shape;
	const auto [nf, ne] = channel_counts(s.hop);
	if (static_cast<int>(hidden.size()) != s.channel_count()) throw InvalidInput("simpa: hidden channel count mismatch");
	if (static_cast<int>(model.params.omega.size()) != s.channel_count()) throw InvalidInput("simpa: weight list count mismatch");
	for (int c = 0; c < s.channel_count(); ++c) {
		const Index want = is_friend_channel(c) ? nf : ne;
		if (model.params.omega[c].size() != want) throw InvalidInput("simpa: weight list length inconsistent with hop");
		if (hidden[c].rows() != ch.s_pos.rows() || hidden[c].cols() != s.hidden) throw InvalidInput("simpa: hidden shape mismatch");
	}
	if (s.balance_variant && s.hop != 2) throw InvalidInput("balance variant supports hop = 2 only");
}

// Sum_{i=0..h} w_i A^i H by repeated sparse-dense products.
inline void friend_aggregate(const SparseMatrix& a, const Vector& w, const Matrix& h, Eigen::Ref<Matrix> z,
                             std::vector<Matrix>* terms, WorkspaceProbe* probe) {
	Matrix x = h;
	Matrix tmp(h.rows(), h.cols());
	if (probe) {
		probe->note(x);
		probe->note(tmp);
	}
	z = w[0] * x;
	if (terms) terms->push_back(x);
	for (Index i = 1; i < w.size(); ++i) {
		tmp.noalias() = a * x;
		x.swap(tmp);
		z += w[i] * x;
		if (terms) terms->push_back(x);
	}
}

// Sum over (h1,h2) of w (A+)^h1 A- (A+)^h2 H, visiting terms in enemy_exponents order.
inline void enemy_aggregate(const SparseMatrix& a_pos, const SparseMatrix& a_neg, const Vector& w, int hop,
                            const Matrix& h, Eigen::Ref<Matrix> z, std::vector<Matrix>* terms,
                            WorkspaceProbe* probe) {
	z.setZero();
	if (hop == 0) return;
	Matrix base = h; // (A+)^h2 H
	Matrix term(h.rows(), h.cols());
	Matrix tmp(h.rows(), h.cols());
	if (probe) {
		probe->note(base);
		probe->note(term);
		probe->note(tmp);
	}
	Index j = 0;
	for (int h2 = 0; h2 < hop; ++h2) {
		if (h2 > 0) {
			tmp.noalias() = a_pos * base;
			base.swap(tmp);
		}
		term.noalias() = a_neg * base;
		z += w[j++] * term;
		if (terms) terms->push_back(term);
		for (int h1 = 1; h1 + h2 <= hop - 1; ++h1) {
			tmp.noalias() = a_pos * term;
			term.swap(tmp);
			z += w[j++] * term;
			if (terms) terms->push_back(term);
		}
	}
}

} // namespace detail

/// Z = CONCAT(Z^{s+}, Z^{s-}[, Z^{t+}, Z^{t-}]) with Z^{c} = sum_M omega_M M H^{c}.
/// Mixed powers are never formed; every term is a chain of sparse x dense products.
inline Matrix simpa_forward(const NormalizedChannels& ch, std::span<const Matrix> hidden, const SimpaModel& model,
                            SimpaCache* cache = nullptr, WorkspaceProbe* probe = nullptr) {
	detail::check_simpa_inputs(ch, hidden, model);
	const auto& s = model.shape;
	const Index n = ch.s_pos.rows();
	const Index d = s.hidden;
	Matrix z(n, s.embedding_dim());
	if (probe) probe->note(z);
	if (cache) {
		cache->terms.assign(static_cast<std::size_t>(s.channel_count()), {});
		cache->balance_terms.clear();
	}
	for (int c = 0; c < s.channel_count(); ++c) {
		auto block = z.middleCols(c * d, d);
		auto* terms = cache ? &cache->terms[c] : nullptr;
		if (is_friend_channel(c)) {
			detail::friend_aggregate(detail::channel_matrix(ch, c), model.params.omega[c], hidden[c], block, terms, probe);
			if (s.balance_variant) {
				// two consecutive negative hops counted as friendship
				const SparseMatrix& a_neg = detail::channel_matrix(ch, c + 1);
				Matrix once = a_neg * hidden[c];
				Matrix twice = a_neg * once;
				if (probe) {
					probe->note(once);
					probe->note(twice);
				}
				block += model.params.balance[c / 2] * twice;
				if (cache) cache->balance_terms.push_back(std::move(twice));
			}
		} else {
			detail::enemy_aggregate(detail::channel_matrix(ch, c - 1), detail::channel_matrix(ch, c),
			                        model.params.omega[c], s.hop, hidden[c], block, terms, probe);
		}
	}
	return z;
}

/// Same as simpa_forward with the social-balance friend term switched on.
inline Matrix balance_variant_forward(const NormalizedChannels& ch, std::span<const Matrix> hidden,
                                      const SimpaModel& model, SimpaCache* cache = nullptr) {
	if (model.shape.hop != 2) throw InvalidInput("balance_variant_forward: only hop = 2 is supported");
	if (!model.shape.balance_variant) throw InvalidInput("balance_variant_forward: model has no balance weights");
	return simpa_forward(ch, hidden, model, cache);
}

/// Gradients of SIMPA w.r.t. hidden inputs (returned) and path weights (accumulated into grad).
inline std::vector<Matrix> simpa_backward(const NormalizedChannels& ch, const SimpaModel& model,
                                          const SimpaCache& cache, const Matrix& d_z, ParameterSet& grad) {
	const auto& s = model.shape;
	const Index d = s.hidden;
	const int hop = s.hop;
	std::vector<Matrix> d_hidden(static_cast<std::size_t>(s.channel_count()));
	for (int c = 0; c < s.channel_count(); ++c) {
		const Matrix g = d_z.middleCols(c * d, d);
		const Vector& w = model.params.omega[c];
		const auto& terms = cache.terms[c];
		for (Index j = 0; j < w.size(); ++j) grad.omega[c][j] += (g.array() * terms[j].array()).sum();
		if (is_friend_channel(c)) {
			const SparseMatrix& a = detail::channel_matrix(ch, c);
			// Horner: sum_i w_i (A^T)^i G
			Matrix acc = w[w.size() - 1] * g;
			for (Index i = w.size() - 2; i >= 0; --i) acc = Matrix(a.transpose() * acc) + w[i] * g;
			if (s.balance_variant) {
				const SparseMatrix& a_neg = detail::channel_matrix(ch, c + 1);
				grad.balance[c / 2] += (g.array() * cache.balance_terms[c / 2].array()).sum();
				Matrix once = a_neg.transpose() * g;
				acc += model.params.balance[c / 2] * Matrix(a_neg.transpose() * once);
			}
			d_hidden[c] = std::move(acc);
		} else {
			const SparseMatrix& a_pos = detail::channel_matrix(ch, c - 1);
			const SparseMatrix& a_neg = detail::channel_matrix(ch, c);
			if (hop == 0) {
				d_hidden[c] = Matrix::Zero(g.rows(), g.cols());
				continue;
			}
			// U_m = (A+^T)^m G
			std::vector<Matrix> u{g};
			for (int m = 1; m < hop; ++m) u.push_back(a_pos.transpose() * u.back());
			const auto exps = enemy_exponents(hop);
			std::vector<Matrix> v(static_cast<std::size_t>(hop), Matrix::Zero(g.rows(), g.cols()));
			for (std::size_t j = 0; j < exps.size(); ++j) v[exps[j].second] += w[static_cast<Index>(j)] * u[exps[j].first];
			Matrix acc = a_neg.transpose() * v[hop - 1];
			for (int h2 = hop - 2; h2 >= 0; --h2) acc = Matrix(a_pos.transpose() * acc) + Matrix(a_neg.transpose() * v[h2]);
			d_hidden[c] = std::move(acc);
		}
	}
	return d_hidden;
}

// ---------------------------------------------------------------------------
// Head

struct ClusterAssignment {
	Matrix probabilities; // n x K, rows sum to 1
	Labels hard;          // row argmax, lowest index on ties
};

inline Labels row_argmax(const Matrix& p) {
	Labels out(static_cast<std::size_t>(p.rows()));
	for (Index i = 0; i < p.rows(); ++i) {
		Index best = 0;
		for (Index k = 1; k < p.cols(); ++k) {
			if (p(i, k) > p(i, best)) best = k;
		}
		out[i] = static_cast<int>(best);
	}
	return out;
}

inline Matrix row_softmax(const Matrix& logits) {
	if (!logits.allFinite()) throw NumericalError("softmax: non-finite logits");
	Matrix p = logits;
	for (Index i = 0; i < p.rows(); ++i) {
		p.row(i).array() -= p.row(i).maxCoeff();
		p.row(i) = p.row(i).array().exp().matrix();
		p.row(i) /= p.row(i).sum();
	}
	return p;
}

inline ClusterAssignment head_forward(const Matrix& z, const SimpaModel& model, Matrix* logits_out = nullptr) {
	if (z.cols() != model.params.head_w.rows()) throw InvalidInput("head_forward: embedding width mismatch");
	Matrix logits = z * model.params.head_w;
	logits.rowwise() += model.params.head_b.transpose();
	ClusterAssignment out;
	out.probabilities = row_softmax(logits);
	out.hard = row_argmax(out.probabilities);
	if (logits_out) *logits_out = std::move(logits);
	return out;
}

// ---------------------------------------------------------------------------
// Whole network

struct DropoutMasks {
	std::vector<Matrix> per_channel;
};

struct NetworkForward {
	std::vector<MlpCache> mlp;
	std::vector<Matrix> hidden;
	SimpaCache simpa;
	Matrix embedding;
	ClusterAssignment assignment;

	DropoutMasks masks() const {
		DropoutMasks m;
		for (const auto& c : mlp) m.per_channel.push_back(c.mask);
		return m;
	}
};

/// Full forward pass. In training mode dropout masks are drawn from `rng` unless
/// `masks` is given, in which case they are replayed.
inline NetworkForward network_forward(const SimpaModel& model, const NormalizedChannels& ch, const Matrix& x,
                                      bool training, Rng* rng = nullptr, const DropoutMasks* masks = nullptr) {
	if (x.rows() != ch.s_pos.rows()) throw InvalidInput("feature rows do not match node count");
	if (x.cols() != model.shape.d_in) throw InvalidInput("feature width does not match model input dimension");
	NetworkForward f;
	const int channels = model.shape.channel_count();
	f.mlp.resize(static_cast<std::size_t>(channels));
	for (int c = 0; c < channels; ++c) {
		const Matrix* fixed = masks != nullptr ? &masks->per_channel.at(c) : nullptr;
		f.hidden.push_back(mlp_forward(x, model.params.mlp[c], training, rng, &f.mlp[c], fixed));
	}
	f.embedding = simpa_forward(ch, f.hidden, model, &f.simpa);
	f.assignment = head_forward(f.embedding, model);
	return f;
}

/// Backpropagates dL/dP and dL/dZ through head, SIMPA and MLPs.
inline GradientTape network_backward(const SimpaModel& model, const NormalizedChannels& ch, const Matrix& x,
                                     const NetworkForward& f, const Matrix& d_prob, const Matrix* d_embedding) {
	GradientTape grad = ParameterSet::zeros(model.shape);
	const Matrix& p = f.assignment.probabilities;
	// softmax Jacobian-vector product per row
	const Vector inner = (d_prob.array() * p.array()).rowwise().sum();
	Matrix d_logits = p.array() * (d_prob.colwise() - inner).array();
	grad.head_w = f.embedding.transpose() * d_logits;
	grad.head_b = d_logits.colwise().sum().transpose();
	Matrix d_z = d_logits * model.params.head_w.transpose();
	if (d_embedding != nullptr) d_z += *d_embedding;
	const auto d_hidden = simpa_backward(ch, model, f.simpa, d_z, grad);
	for (int c = 0; c < model.shape.channel_count(); ++c) {
		mlp_backward(x, model.params.mlp[c], f.mlp[c], d_hidden[c], grad.mlp[c]);
	}
	return grad;
}

} // namespace sssnet
