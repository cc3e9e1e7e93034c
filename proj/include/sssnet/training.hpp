#pragma once

// Objective (probabilistic balanced normalized cut + cross entropy + triplet),
// reverse-mode gradients through the network, Adam, data splits and the
// full-graph training loop with validation-based model selection.

#include "sssnet/metrics.hpp"
#include "sssnet/simpa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sssnet {

// ---------------------------------------------------------------------------
// Splits

struct Split {
	std::vector<Index> train;
	std::vector<Index> val;
	std::vector<Index> test;
	std::vector<Index> seeds; // subset of train
};

struct SplitFractions {
	double test = 0.1;
	double val = 0.1;
};

/// Per cluster: ceil(test*size) test nodes, ceil(val*size) validation nodes, rest train;
/// ceil(seed_ratio*train) of the train nodes become seeds. Index lists come back sorted.
inline Split make_split(const Labels& labels, SplitFractions fractions, double seed_ratio, Rng& rng) {
	if (fractions.test < 0.0 || fractions.val < 0.0 || fractions.test + fractions.val >= 1.0) {
		throw InvalidInput("make_split: need test, val >= 0 and test + val < 1");
	}
	if (seed_ratio < 0.0 || seed_ratio > 1.0) throw InvalidInput("make_split: seed ratio must lie in [0, 1]");
	const int K = cluster_count(labels);
	std::vector<std::vector<Index>> members(static_cast<std::size_t>(K));
	for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<Index>(i));
	Split s;
	for (int k = 0; k < K; ++k) {
		auto& m = members[k];
		if (m.empty()) continue;
		rng.shuffle(std::span<Index>(m));
		const auto size = static_cast<Index>(m.size());
		const auto n_test = static_cast<Index>(std::ceil(fractions.test * static_cast<double>(size) - 1e-9));
		auto n_val = static_cast<Index>(std::ceil(fractions.val * static_cast<double>(size) - 1e-9));
		if (n_test + n_val >= size) n_val = std::max<Index>(0, size - n_test - 1);
		const Index n_train = size - n_test - n_val;
		if (n_train <= 0) throw InvalidInput("make_split: cluster " + std::to_string(k) + " too small for a training node");
		const auto n_seed = static_cast<Index>(std::ceil(seed_ratio * static_cast<double>(n_train) - 1e-9));
		Index pos = 0;
		for (Index i = 0; i < n_test; ++i) s.test.push_back(m[pos++]);
		for (Index i = 0; i < n_val; ++i) s.val.push_back(m[pos++]);
		for (Index i = 0; i < n_train; ++i) {
			if (i < n_seed) s.seeds.push_back(m[pos]);
			s.train.push_back(m[pos++]);
		}
	}
	for (auto* v : {&s.train, &s.val, &s.test, &s.seeds}) std::sort(v->begin(), v->end());
	return s;
}

/// Self-supervised split: every node trains, nothing is seeded or held out.
inline Split unlabeled_split(Index n) {
	Split s;
	s.train.resize(static_cast<std::size_t>(n));
	std::iota(s.train.begin(), s.train.end(), Index{0});
	return s;
}

// ---------------------------------------------------------------------------
// Loss terms

struct LossTerm {
	double value = 0.0;
	Matrix grad; // same shape as the differentiated input
};

inline void check_stochastic(const Matrix& p) {
	for (Index i = 0; i < p.rows(); ++i) {
		if ((p.row(i).array() < 0.0).any() || !p.row(i).allFinite() || std::abs(p.row(i).sum() - 1.0) > 1e-9) {
			throw InvalidInput("probability matrix row " + std::to_string(i) + " is not stochastic");
		}
	}
}

/// Probabilistic balanced normalized cut on the subgraph induced by a node subset.
/// Degrees are recomputed on the induced subgraph.
class PbncObjective {
  public:
	PbncObjective(const SignedGraph& graph, std::span<const Index> subset)
	    : m_nodes(subset.begin(), subset.end()), m_n(graph.size()) {
		if (m_nodes.empty()) throw InvalidInput("pbnc: node subset is empty");
		const SignedGraph sub = induced_subgraph(graph, m_nodes);
		m_adj = sub.adjacency();
		m_adj_sym = m_adj + SparseMatrix(m_adj.transpose());
		const DegreeSet d = degrees(sub);
		m_dpos = d.pos;
		m_dbar = d.total;
	}

	LossTerm evaluate(const Matrix& p, bool want_grad = true) const {
		check_stochastic(p);
		if (p.rows() != m_n) throw InvalidInput("pbnc: probability rows do not match graph");
		const Index m = static_cast<Index>(m_nodes.size());
		Matrix q(m, p.cols());
		for (Index i = 0; i < m; ++i) q.row(i) = p.row(m_nodes[i]);
		const Matrix aq = m_adj * q;
		LossTerm out;
		Matrix gq;
		if (want_grad) gq = Matrix::Zero(m, p.cols());
		for (Index k = 0; k < p.cols(); ++k) {
			const auto col = q.col(k);
			const double num = (m_dpos.array() * col.array().square()).sum() - col.dot(aq.col(k));
			const double den = (m_dbar.array() * col.array().square()).sum();
			if (den <= 0.0) continue;
			out.value += num / den;
			if (want_grad) {
				const Vector d_num = 2.0 * m_dpos.cwiseProduct(col) - m_adj_sym * col;
				const Vector d_den = 2.0 * m_dbar.cwiseProduct(col);
				gq.col(k) = (d_num * den - d_den * num) / (den * den);
			}
		}
		if (want_grad) {
			out.grad = Matrix::Zero(p.rows(), p.cols());
			for (Index i = 0; i < m; ++i) out.grad.row(m_nodes[i]) = gq.row(i);
		}
		return out;
	}

  private:
	std::vector<Index> m_nodes;
	Index m_n;
	SparseMatrix m_adj;
	SparseMatrix m_adj_sym;
	Vector m_dpos;
	Vector m_dbar;
};

inline double pbnc_loss(const Matrix& p, const SignedGraph& graph, std::span<const Index> subset) {
	return PbncObjective(graph, subset).evaluate(p, false).value;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Mean negative log-likelihood of the seed labels, probabilities clamped at 1e-12.
inline LossTerm ce_loss(const Matrix& p, std::span<const Index> seeds, const Labels& labels, bool want_grad = true) {
	if (seeds.empty()) throw InvalidInput("ce_loss: empty seed set");
	LossTerm out;
	if (want_grad) out.grad = Matrix::Zero(p.rows(), p.cols());
	const double inv = 1.0 / static_cast<double>(seeds.size());
	for (Index i : seeds) {
		const int y = labels[i];
		const double py = p(i, y);
		out.value -= std::log(std::max(py, kProbabilityFloor)) * inv;
		if (want_grad && py > kProbabilityFloor) out.grad(i, y) -= inv / py;
	}
	return out;
}

struct TripletIndex {
	Index anchor = 0;
	Index positive = 0;
	Index negative = 0;
	friend bool operator==(const TripletIndex&, const TripletIndex&) = default;
};

/// Anchors are seeds whose cluster has another seed; they are visited in id order and
/// cycled until `cap` triplets exist. Partners are drawn uniformly.
inline std::vector<TripletIndex> sample_triplets(std::span<const Index> seeds, const Labels& labels, std::size_t cap,
                                                 Rng& rng) {
	std::vector<Index> sorted(seeds.begin(), seeds.end());
	std::sort(sorted.begin(), sorted.end());
	std::vector<std::vector<Index>> by_cluster;
	for (Index s : sorted) {
		const auto k = static_cast<std::size_t>(labels[s]);
		if (by_cluster.size() <= k) by_cluster.resize(k + 1);
		by_cluster[k].push_back(s);
	}
	std::vector<Index> anchors;
	for (Index s : sorted) {
		const auto k = static_cast<std::size_t>(labels[s]);
		const bool has_positive = by_cluster[k].size() >= 2;
		const bool has_negative = by_cluster[k].size() < sorted.size();
		if (has_positive && has_negative) anchors.push_back(s);
	}
	std::vector<TripletIndex> out;
	if (anchors.empty() || cap == 0) return out;
	out.reserve(cap);
	for (std::size_t t = 0; out.size() < cap; ++t) {
		const Index a = anchors[t % anchors.size()];
		const auto& same = by_cluster[static_cast<std::size_t>(labels[a])];
		Index pos = a;
		while (pos == a) pos = same[rng.below(same.size())];
		Index neg = a;
		while (labels[neg] == labels[a]) neg = sorted[rng.below(sorted.size())];
		out.push_back({a, pos, neg});
	}
	return out;
}

/// Cosine similarity; 0 when either vector is zero.
inline double cosine_similarity(const RowVector& a, const RowVector& b) {
	const double na = a.norm(), nb = b.norm();
	if (na == 0.0 || nb == 0.0) return 0.0;
	return a.dot(b) / (na * nb);
}

struct TripletLoss {
	double value = 0.0;
	bool empty = true;
	Matrix grad;
};

/// mean ReLU(CS(z_a, z_neg) - CS(z_a, z_pos) + alpha). With `literal` the two
/// similarities swap places: mean ReLU(CS(z_a, z_pos) - CS(z_a, z_neg) + alpha).
inline TripletLoss triplet_loss(const Matrix& z, std::span<const TripletIndex> triplets, double alpha,
                                bool literal = false, bool want_grad = true) {
	TripletLoss out;
	if (want_grad) out.grad = Matrix::Zero(z.rows(), z.cols());
	if (triplets.empty()) return out;
	out.empty = false;
	const double inv = 1.0 / static_cast<double>(triplets.size());
	// d CS(a,b) / d a
	auto d_cos = [](const RowVector& a, const RowVector& b) -> RowVector {
		const double na = a.norm(), nb = b.norm();
		if (na == 0.0 || nb == 0.0) return RowVector::Zero(a.size());
		const double cs = a.dot(b) / (na * nb);
		return b / (na * nb) - cs * a / (na * na);
	};
	for (const auto& t : triplets) {
		const RowVector za = z.row(t.anchor), zp = z.row(t.positive), zn = z.row(t.negative);
		const double cp = cosine_similarity(za, zp), cn = cosine_similarity(za, zn);
		const double margin = (literal ? cp - cn : cn - cp) + alpha;
		if (margin <= 0.0) continue;
		out.value += margin * inv;
		if (!want_grad) continue;
		const double sp = literal ? inv : -inv; // coefficient on CS(a, pos)
		const double sn = -sp;
		out.grad.row(t.anchor) += sp * d_cos(za, zp) + sn * d_cos(za, zn);
		out.grad.row(t.positive) += sp * d_cos(zp, za);
		out.grad.row(t.negative) += sn * d_cos(zn, za);
	}
	return out;
}

// ---------------------------------------------------------------------------
// Objective

struct TrainConfig {
	double gamma_s = 50.0;
	double gamma_t = 0.1;
	double alpha = 0.0;
	double lr = 0.01;
	double weight_decay = 5e-4;
	int max_epochs = 300;
	int patience = 100;
	/// Triplets per epoch; 0 means 10 x number of seeds.
	std::size_t triplet_cap = 0;
	bool use_pbnc = true;
	bool use_supervised = true;
	bool triplet_literal = false;
	std::uint64_t seed = 0;
};

struct ModelConfig {
	Index hidden = 32;
	int hop = 2;
	double tau = 0.5;
	bool balance_variant = false;
};

struct LossBreakdown {
	double pbnc = 0.0;
	double ce = 0.0;
	double triplet = 0.0;
	double total = 0.0;
	bool supervised = false;
	bool triplet_empty = true;
};

/// L = L_pbnc + gamma_s (L_ce + gamma_t L_triplet); without seeds only L_pbnc remains.
inline double total_loss(const LossBreakdown& parts, const TrainConfig& cfg) {
	double total = cfg.use_pbnc ? parts.pbnc : 0.0;
	if (parts.supervised) total += cfg.gamma_s * (parts.ce + (parts.triplet_empty ? 0.0 : cfg.gamma_t * parts.triplet));
	return total;
}

/// Everything a single loss evaluation needs besides the model.
struct ObjectiveContext {
	const NormalizedChannels* channels = nullptr;
	const Matrix* features = nullptr;
	const PbncObjective* pbnc = nullptr;
	const Labels* labels = nullptr;
	std::span<const Index> seeds;
	std::span<const TripletIndex> triplets;
	TrainConfig config;
};

struct ObjectiveResult {
	LossBreakdown loss;
	NetworkForward forward;
	Matrix d_prob;
	Matrix d_embedding;
};

inline ObjectiveResult evaluate_objective(const SimpaModel& model, const ObjectiveContext& ctx, bool training,
                                          Rng* rng = nullptr, const DropoutMasks* masks = nullptr,
                                          bool want_grad = true) {
	const TrainConfig& cfg = ctx.config;
	ObjectiveResult r;
	r.forward = network_forward(model, *ctx.channels, *ctx.features, training, rng, masks);
	const Matrix& p = r.forward.assignment.probabilities;
	r.d_prob = Matrix::Zero(p.rows(), p.cols());
	r.d_embedding = Matrix::Zero(r.forward.embedding.rows(), r.forward.embedding.cols());
	const bool supervised = cfg.use_supervised && !ctx.seeds.empty() && ctx.labels != nullptr;
	if (!cfg.use_pbnc && !supervised) throw InvalidInput("objective has no active term");
	r.loss.supervised = supervised;
	if (cfg.use_pbnc) {
		auto term = ctx.pbnc->evaluate(p, want_grad);
		r.loss.pbnc = term.value;
		if (want_grad) r.d_prob += term.grad;
	}
	if (supervised) {
		auto ce = ce_loss(p, ctx.seeds, *ctx.labels, want_grad);
		r.loss.ce = ce.value;
		if (want_grad) r.d_prob += cfg.gamma_s * ce.grad;
		auto tl = triplet_loss(r.forward.embedding, ctx.triplets, cfg.alpha, cfg.triplet_literal, want_grad);
		r.loss.triplet = tl.value;
		r.loss.triplet_empty = tl.empty;
		if (want_grad && !tl.empty) r.d_embedding += (cfg.gamma_s * cfg.gamma_t) * tl.grad;
	}
	r.loss.total = total_loss(r.loss, cfg);
	return r;
}

inline GradientTape backward(const SimpaModel& model, const ObjectiveContext& ctx, const ObjectiveResult& r) {
	if (!std::isfinite(r.loss.total)) throw NumericalError("backward: non-finite loss");
	return network_backward(model, *ctx.channels, *ctx.features, r.forward, r.d_prob, &r.d_embedding);
}

// ---------------------------------------------------------------------------
// Adam with L2 weight decay folded into the gradient

struct AdamState {
	ParameterSet m;
	ParameterSet v;
	long step = 0;

	static AdamState for_model(const SimpaModel& model) {
		return {ParameterSet::zeros(model.shape), ParameterSet::zeros(model.shape), 0};
	}
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

inline void adam_step(SimpaModel& model, GradientTape& grad, double lr, double weight_decay, AdamState& state) {
	++state.step;
	const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
	const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
	auto params = model.params.blocks();
	auto grads = grad.blocks();
	auto ms = state.m.blocks();
	auto vs = state.v.blocks();
	for (std::size_t b = 0; b < params.size(); ++b) {
		for (std::size_t i = 0; i < params[b].size(); ++i) {
			const double g = grads[b][i] + weight_decay * params[b][i];
			ms[b][i] = kAdamBeta1 * ms[b][i] + (1.0 - kAdamBeta1) * g;
			vs[b][i] = kAdamBeta2 * vs[b][i] + (1.0 - kAdamBeta2) * g * g;
			const double mhat = ms[b][i] / bc1;
			const double vhat = vs[b][i] / bc2;
			params[b][i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
		}
	}
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
	int epoch = 0;
	LossBreakdown loss;
	double train_ari = std::numeric_limits<double>::quiet_NaN();
	double val_ari = std::numeric_limits<double>::quiet_NaN();
	double unhappy = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
	SimpaModel model;
	std::vector<EpochRecord> history;
	int best_epoch = 0;
	bool diverged = false;
	std::string error;
};

/// Full-graph training. `labels` may be null (self-supervised). Selection: best validation
/// ARI when labels and validation nodes exist, last epoch when labels exist without
/// validation nodes, lowest training loss otherwise.
inline TrainResult train(const SignedGraph& graph, const Matrix& features, const Split& split, const Labels* labels,
                         int K, const ModelConfig& mcfg, const TrainConfig& cfg) {
	if (features.rows() != graph.size()) throw InvalidInput("train: feature rows do not match node count");
	if (labels != nullptr && static_cast<Index>(labels->size()) != graph.size()) {
		throw InvalidInput("train: label count mismatch");
	}
	if (split.train.empty()) throw InvalidInput("train: empty training set");
	const ModelShape shape{features.cols(), mcfg.hidden, K, mcfg.hop, graph.directed(), mcfg.balance_variant};
	Rng rng(cfg.seed);
	TrainResult result;
	result.model = init_model(shape, rng.next());
	AdamState adam = AdamState::for_model(result.model);

	const NormalizedChannels channels = normalized_channels(graph, mcfg.tau, 0.0);
	const PbncObjective pbnc(graph, split.train);
	const std::span<const Index> seeds = labels != nullptr ? std::span<const Index>(split.seeds) : std::span<const Index>();
	const std::size_t cap = cfg.triplet_cap > 0 ? cfg.triplet_cap : 10 * seeds.size();

	const bool select_by_val = labels != nullptr && !split.val.empty();
	const bool select_last = labels != nullptr && split.val.empty();
	double best_score = -std::numeric_limits<double>::infinity();
	int since_best = 0;
	SimpaModel best = result.model;

	for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
		const auto triplets = labels != nullptr ? sample_triplets(seeds, *labels, cap, rng) : std::vector<TripletIndex>{};
		ObjectiveContext ctx{&channels, &features, &pbnc, labels, seeds, triplets, cfg};
		EpochRecord rec;
		rec.epoch = epoch;
		try {
			const auto obj = evaluate_objective(result.model, ctx, true, &rng);
			rec.loss = obj.loss;
			auto grad = backward(result.model, ctx, obj);
			adam_step(result.model, grad, cfg.lr, cfg.weight_decay, adam);
			const auto eval = network_forward(result.model, channels, features, false);
			const Labels& pred = eval.assignment.hard;
			if (graph.edge_count() > 0) rec.unhappy = unhappy_ratio(graph, pred);
			if (labels != nullptr) {
				rec.train_ari = split.train.size() >= 2 ? ari(subset_labels(pred, split.train), subset_labels(*labels, split.train))
				                                        : std::numeric_limits<double>::quiet_NaN();
				if (split.val.size() >= 2) rec.val_ari = ari(subset_labels(pred, split.val), subset_labels(*labels, split.val));
			}
		} catch (const NumericalError& e) {
			result.diverged = true;
			result.error = e.what();
			result.history.push_back(rec);
			break;
		}
		result.history.push_back(rec);

		const double score = select_by_val ? rec.val_ari : -rec.loss.total;
		if (score > best_score) {
			best_score = score;
			since_best = 0;
			if (!select_last) {
				best = result.model;
				result.best_epoch = epoch;
			}
		} else {
			++since_best;
		}
		if (select_last) {
			best = result.model;
			result.best_epoch = epoch;
		}
		if (since_best >= cfg.patience) break;
	}
	result.model = std::move(best);
	return result;
}

/// One row per epoch: epoch, L_pbnc, L_ce, L_triplet, total, train/val ARI, unhappy ratio.
inline void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
	auto num = [](double v) {
		if (std::isnan(v)) return std::string("nan");
		char buf[40];
		std::snprintf(buf, sizeof buf, "%.17g", v);
		return std::string(buf);
	};
	out << "epoch,pbnc,ce,triplet,total,train_ari,val_ari,unhappy_ratio\n";
	for (const auto& r : history) {
		out << r.epoch << ',' << num(r.loss.pbnc) << ',' << num(r.loss.ce) << ','
		    << (r.loss.triplet_empty ? std::string("nan") : num(r.loss.triplet)) << ',' << num(r.loss.total) << ','
		    << num(r.train_ari) << ',' << num(r.val_ari) << ',' << num(r.unhappy) << '\n';
	}
}

/// Eval-mode prediction for all nodes.
inline ClusterAssignment predict(const SimpaModel& model, const SignedGraph& graph, const Matrix& features, double tau) {
	const auto channels = normalized_channels(graph, tau, 0.0);
	return network_forward(model, channels, features, false).assignment;
}

} // namespace sssnet
