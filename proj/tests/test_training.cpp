#include "oracles.hpp"
#include "sssnet/spectral.hpp"
#include "sssnet/synthgen.hpp"
#include "sssnet/training.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace sssnet;

namespace {

std::vector<Index> all_nodes(Index n) {
	std::vector<Index> v(static_cast<std::size_t>(n));
	std::iota(v.begin(), v.end(), Index{0});
	return v;
}

} // namespace

TEST(Pbnc, HandInstance) {
	const Labels labels{0, 0, 1, 1};
	const Matrix p = testutil::one_hot(labels, 2);
	const auto all = all_nodes(4);
	EXPECT_EQ(pbnc_loss(p, testutil::hand_graph(false), all), 0.0);
	EXPECT_EQ(pbnc_loss(p, testutil::hand_graph(true), all), 2.0 / 3.0);
}

TEST(Pbnc, UniformAssignmentReduces) {
	Rng rng(1);
	const auto g = testutil::random_signed_graph(20, 0.3, false, rng);
	const int K = 3;
	const Matrix p = Matrix::Constant(20, K, 1.0 / K);
	const DegreeSet d = degrees(g);
	const Vector ones = Vector::Ones(20);
	const double expected = K * (d.pos.sum() - ones.dot(g.adjacency() * ones)) / d.total.sum();
	EXPECT_NEAR(pbnc_loss(p, g, all_nodes(20)), expected, 1e-12);
}

TEST(Pbnc, NonnegativeAndColumnPermutationInvariant) {
	Rng rng(2);
	for (int trial = 0; trial < 20; ++trial) {
		const auto g = testutil::random_signed_graph(15, 0.3, trial % 2 == 0, rng);
		const Matrix p = row_softmax(testutil::random_matrix(15, 4, rng, 3.0));
		Matrix q = p;
		q.col(0).swap(q.col(3));
		const auto all = all_nodes(15);
		EXPECT_GE(pbnc_loss(p, g, all), 0.0);
		EXPECT_NEAR(pbnc_loss(p, g, all), pbnc_loss(q, g, all), 1e-12);
	}
}

TEST(Pbnc, UsesInducedSubgraphDegrees) {
	// without node 3 cluster 0 keeps 2/3; on {0,1} alone it becomes 2/2
	const Matrix p = testutil::one_hot({0, 0, 1, 1}, 2);
	const std::vector<Index> sub{0, 1, 2};
	EXPECT_DOUBLE_EQ(pbnc_loss(p, testutil::hand_graph(true), sub), 2.0 / 3.0 + 0.0);
	const std::vector<Index> pair{0, 1};
	EXPECT_DOUBLE_EQ(pbnc_loss(p, testutil::hand_graph(true), pair), 1.0);
}

TEST(Pbnc, RejectsNonStochastic) {
	Matrix p = Matrix::Constant(4, 2, 0.4);
	EXPECT_THROW(pbnc_loss(p, testutil::hand_graph(false), all_nodes(4)), InvalidInput);
	EXPECT_THROW(pbnc_loss(testutil::one_hot({0, 0, 1, 1}, 2), testutil::hand_graph(false), {}), InvalidInput);
}

TEST(Pbnc, GradientMatchesFiniteDifferences) {
	Rng rng(3);
	const auto g = testutil::random_signed_graph(12, 0.4, true, rng);
	const Matrix p = row_softmax(testutil::random_matrix(12, 3, rng));
	const std::vector<Index> sub{0, 2, 3, 5, 7, 8, 11};
	const PbncObjective obj(g, sub);
	const Matrix grad = obj.evaluate(p).grad;
	// the objective is a function of P without the stochastic constraint; perturb freely
	for (Index i = 0; i < 12; ++i) {
		for (Index k = 0; k < 3; ++k) {
			auto value = [&](double delta) {
				Matrix q = p;
				q(i, k) += delta;
				double total = 0.0;
				const SignedGraph s = induced_subgraph(g, sub);
				const DegreeSet d = degrees(s);
				Matrix qs(static_cast<Index>(sub.size()), 3);
				for (std::size_t r = 0; r < sub.size(); ++r) qs.row(static_cast<Index>(r)) = q.row(sub[r]);
				for (Index c = 0; c < 3; ++c) {
					const Vector x = qs.col(c);
					total += (x.dot(d.pos.cwiseProduct(x)) - x.dot(s.adjacency() * x)) / x.dot(d.total.cwiseProduct(x));
				}
				return total;
			};
			const double fd = (value(1e-6) - value(-1e-6)) / 2e-6;
			EXPECT_NEAR(grad(i, k), fd, 1e-6);
		}
	}
}

TEST(CrossEntropy, Values) {
	const Matrix p = testutil::one_hot({0, 1, 2}, 3);
	const std::vector<Index> seeds{0, 1, 2};
	EXPECT_EQ(ce_loss(p, seeds, {0, 1, 2}).value, 0.0);
	EXPECT_NEAR(ce_loss(Matrix::Constant(3, 4, 0.25), seeds, {0, 1, 2}).value, std::log(4.0), 1e-15);
	Matrix q(2, 2);
	q << 0.5, 0.5, 0.75, 0.25;
	const std::vector<Index> two{0, 1};
	EXPECT_NEAR(ce_loss(q, two, {0, 1}).value, (std::log(2.0) + std::log(4.0)) / 2.0, 1e-15);
	EXPECT_THROW(ce_loss(q, {}, {0, 1}), InvalidInput);
	EXPECT_NEAR(ce_loss(testutil::one_hot({1, 0}, 2), two, {0, 1}).value, -std::log(1e-12), 1e-9);
}

TEST(Triplets, Enumeration) {
	Rng rng(4);
	const Labels labels{0, 0, 1};
	const std::vector<Index> seeds{0, 1, 2};
	const auto t = sample_triplets(seeds, labels, 20, rng);
	EXPECT_EQ(t.size(), 20u);
	for (const auto& x : t) {
		EXPECT_TRUE((x == TripletIndex{0, 1, 2}) || (x == TripletIndex{1, 0, 2}));
	}
	const Labels one{0, 0, 0};
	EXPECT_TRUE(sample_triplets(seeds, one, 20, rng).empty());
}

TEST(Triplets, CyclingCoversAnchorsEvenly) {
	Rng rng(5);
	Labels labels(50);
	std::vector<Index> seeds(50);
	for (Index i = 0; i < 50; ++i) {
		labels[i] = static_cast<int>(i % 2);
		seeds[i] = i;
	}
	const auto t = sample_triplets(seeds, labels, 100, rng);
	ASSERT_EQ(t.size(), 100u);
	std::vector<int> count(50, 0);
	for (const auto& x : t) ++count[x.anchor];
	for (int c : count) EXPECT_EQ(c, 2);
}

TEST(TripletLoss, Values) {
	Matrix z(3, 2);
	z << 1, 0, 1, 0, 0, 1;
	const std::vector<TripletIndex> t{{0, 1, 2}};
	EXPECT_EQ(triplet_loss(z, t, 0.0).value, 0.0);
	Matrix inv(3, 2);
	inv << 1, 0, 0, 1, 1, 0;
	EXPECT_EQ(triplet_loss(inv, t, 0.0).value, 1.0);
	EXPECT_EQ(triplet_loss(Matrix::Ones(3, 2), t, 0.5).value, 0.5);
	EXPECT_TRUE(triplet_loss(z, {}, 0.0).empty);
	// the printed argument order rewards the inverted case
	EXPECT_EQ(triplet_loss(z, t, 0.0, true).value, 1.0);
	Matrix zero = z;
	zero.row(1).setZero();
	EXPECT_EQ(cosine_similarity(zero.row(0), zero.row(1)), 0.0);
}

TEST(TotalLoss, Arithmetic) {
	TrainConfig cfg;
	LossBreakdown parts;
	parts.pbnc = 0.5;
	parts.ce = 0.02;
	parts.triplet = 0.1;
	parts.supervised = true;
	parts.triplet_empty = false;
	EXPECT_NEAR(total_loss(parts, cfg), 2.0, 1e-12);
	parts.supervised = false;
	EXPECT_EQ(total_loss(parts, cfg), 0.5);
}

TEST(Backward, MatchesFiniteDifferencesUndirected) {
	auto inst = oracle::make_grad_instance(11, 30, 3, 2, 8, false, false, 0.1);
	const auto r = oracle::check_gradients(inst->model, inst->context(), inst->masks);
	EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
	EXPECT_GT(r.checked, 0);
}

TEST(Backward, MatchesFiniteDifferencesDirected) {
	auto inst = oracle::make_grad_instance(12, 30, 3, 2, 8, true, false, 0.0);
	const auto r = oracle::check_gradients(inst->model, inst->context(), inst->masks);
	EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
}

TEST(Backward, MatchesFiniteDifferencesBalanceVariantAndLiteralTriplet) {
	auto inst = oracle::make_grad_instance(13, 20, 3, 2, 6, true, true, 0.2);
	inst->config.triplet_literal = true;
	const auto r = oracle::check_gradients(inst->model, inst->context(), inst->masks);
	EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
}

TEST(Backward, HopThreeAndSelfSupervised) {
	auto inst = oracle::make_grad_instance(14, 20, 2, 3, 5, true);
	inst->config.use_supervised = false;
	const auto r = oracle::check_gradients(inst->model, inst->context(), inst->masks);
	EXPECT_LT(r.max_rel_error, 1e-4) << r.worst_parameter;
}

TEST(Backward, IdentityWeightGradientIsInnerProduct) {
	auto inst = oracle::make_grad_instance(15, 20, 3, 2, 4, false);
	const auto ctx = inst->context();
	const auto res = evaluate_objective(inst->model, ctx, true, nullptr, &inst->masks);
	const auto grad = backward(inst->model, ctx, res);
	// dL/dZ from the head plus the triplet term
	const Matrix& p = res.forward.assignment.probabilities;
	const Vector inner = (res.d_prob.array() * p.array()).rowwise().sum();
	const Matrix d_logits = p.array() * (res.d_prob.colwise() - inner).array();
	const Matrix d_z = d_logits * inst->model.params.head_w.transpose() + res.d_embedding;
	const double expected = (d_z.leftCols(4).array() * res.forward.hidden[0].array()).sum();
	EXPECT_NEAR(grad.omega[0][0], expected, 1e-10 * std::max(1.0, std::abs(expected)));
}

TEST(Backward, RejectsNonFiniteLoss) {
	auto inst = oracle::make_grad_instance(16, 10, 2, 1, 3, false);
	const auto ctx = inst->context();
	auto res = evaluate_objective(inst->model, ctx, true, nullptr, &inst->masks);
	res.loss.total = std::numeric_limits<double>::infinity();
	EXPECT_THROW(backward(inst->model, ctx, res), NumericalError);
}

TEST(Adam, ClosedFormSteps) {
	SimpaModel m = init_model({2, 2, 2, 1, false, false}, 1);
	const SimpaModel before = m;
	auto state = AdamState::for_model(m);
	GradientTape zero = ParameterSet::zeros(m.shape);
	adam_step(m, zero, 0.01, 0.0, state);
	EXPECT_EQ(m.params.head_w, before.params.head_w);

	GradientTape g = ParameterSet::zeros(m.shape);
	g.head_w.setConstant(-3.0);
	auto fresh = AdamState::for_model(m);
	SimpaModel m2 = before;
	adam_step(m2, g, 0.01, 0.0, fresh);
	const Matrix delta = m2.params.head_w - before.params.head_w;
	EXPECT_NEAR(delta.maxCoeff(), 0.01, 1e-8);
	EXPECT_NEAR(delta.minCoeff(), 0.01, 1e-8);
}

TEST(Adam, WeightDecayActsAsGradient) {
	SimpaModel m = init_model({1, 1, 1, 0, false, false}, 1);
	m.params.head_w.setOnes();
	auto state = AdamState::for_model(m);
	GradientTape zero = ParameterSet::zeros(m.shape);
	adam_step(m, zero, 0.01, 5e-4, state);
	EXPECT_NEAR(state.m.head_w(0, 0), 0.1 * 5e-4, 1e-18);
	// first bias-corrected step is lr * g / (|g| + eps)
	EXPECT_NEAR(m.params.head_w(0, 0), 1.0 - 0.01 * 5e-4 / (5e-4 + 1e-8), 1e-14);
}

TEST(Split, CeilingArithmetic) {
	Rng rng(6);
	const Labels ten(10, 0);
	const auto s = make_split(ten, {0.1, 0.1}, 0.1, rng);
	EXPECT_EQ(s.test.size(), 1u);
	EXPECT_EQ(s.val.size(), 1u);
	EXPECT_EQ(s.train.size(), 8u);
	EXPECT_EQ(s.seeds.size(), 1u);
}

TEST(Split, HalfProtocolAndFullSeeds) {
	Rng rng(7);
	Labels labels(20);
	for (int i = 0; i < 20; ++i) labels[i] = i % 2;
	const auto s = make_split(labels, {0.5, 0.0}, 0.5, rng);
	EXPECT_EQ(s.train.size(), 10u);
	EXPECT_EQ(s.test.size(), 10u);
	EXPECT_EQ(s.seeds.size(), 6u); // ceil(0.5 * 5) per cluster
	const auto all = make_split(labels, {0.1, 0.1}, 1.0, rng);
	EXPECT_EQ(all.seeds, all.train);
}

TEST(Split, DisjointCoverAndDeterministic) {
	Labels labels(97);
	for (int i = 0; i < 97; ++i) labels[i] = (i * 7) % 5;
	Rng a(8), b(8);
	const auto s = make_split(labels, {0.1, 0.1}, 0.2, a);
	const auto t = make_split(labels, {0.1, 0.1}, 0.2, b);
	EXPECT_EQ(s.train, t.train);
	EXPECT_EQ(s.seeds, t.seeds);
	std::vector<int> seen(97, 0);
	for (auto* v : {&s.train, &s.val, &s.test}) {
		for (Index i : *v) ++seen[i];
	}
	for (int c : seen) EXPECT_EQ(c, 1);
	for (Index i : s.seeds) EXPECT_TRUE(std::binary_search(s.train.begin(), s.train.end(), i));
}

TEST(Split, TinyClusterSacrificesValidation) {
	Rng rng(9);
	const Labels two{0, 0, 1, 1, 1, 1, 1, 1, 1, 1};
	const auto s = make_split(two, {0.1, 0.1}, 0.1, rng);
	EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 10u);
	const Labels single{0, 1, 1, 1};
	EXPECT_THROW(make_split(single, {0.1, 0.1}, 0.1, rng), InvalidInput);
}

TEST(Train, PatienceZeroRunsOneEpoch) {
	const auto lg = sample_ssbm({200, 2, 0.1, 1.0, 0.0, 1});
	const Matrix x = input_features(lg.graph, 2, FeatureMode::Synthetic);
	Rng rng(1);
	const auto split = make_split(lg.labels, {0.1, 0.1}, 0.1, rng);
	TrainConfig cfg;
	cfg.patience = 0;
	const auto r = train(lg.graph, x, split, &lg.labels, 2, {}, cfg);
	EXPECT_EQ(r.history.size(), 1u);
}

TEST(Train, EasyRegimeRecoversPartition) {
	int perfect = 0;
	for (int run = 0; run < 10; ++run) {
		const auto lg = sample_ssbm({200, 2, 0.1, 1.0, 0.0, static_cast<std::uint64_t>(100 + run)});
		const Matrix x = input_features(lg.graph, 2, FeatureMode::Synthetic);
		Rng rng(static_cast<std::uint64_t>(run));
		const auto split = make_split(lg.labels, {0.1, 0.1}, 0.1, rng);
		TrainConfig cfg;
		cfg.seed = static_cast<std::uint64_t>(run);
		const auto r = train(lg.graph, x, split, &lg.labels, 2, {}, cfg);
		const Labels pred = predict(r.model, lg.graph, x, 0.5).hard;
		if (ari(subset_labels(pred, split.train), subset_labels(lg.labels, split.train)) == 1.0) ++perfect;
	}
	EXPECT_GE(perfect, 9);
}

TEST(Train, SelfSupervisedFindsPlantedCut) {
	const auto lg = sample_ssbm({200, 2, 0.1, 1.0, 0.0, 5});
	const Matrix x = input_features(lg.graph, 2, FeatureMode::Synthetic);
	TrainConfig cfg;
	cfg.seed = 3;
	const auto r = train(lg.graph, x, unlabeled_split(lg.graph.size()), nullptr, 2, {}, cfg);
	const Labels pred = predict(r.model, lg.graph, x, 0.5).hard;
	EXPECT_LT(unhappy_ratio(lg.graph, pred), 0.05);
}

TEST(Train, LossDecreasesOverFirstEpochs) {
	std::vector<double> first, twentieth;
	for (int run = 0; run < 10; ++run) {
		const auto lg = sample_ssbm({200, 2, 0.1, 1.0, 0.0, static_cast<std::uint64_t>(200 + run)});
		const Matrix x = input_features(lg.graph, 2, FeatureMode::Synthetic);
		Rng rng(static_cast<std::uint64_t>(run));
		const auto split = make_split(lg.labels, {0.1, 0.1}, 0.1, rng);
		TrainConfig cfg;
		cfg.seed = static_cast<std::uint64_t>(run);
		cfg.max_epochs = 20;
		cfg.patience = 20;
		const auto r = train(lg.graph, x, split, &lg.labels, 2, {}, cfg);
		ASSERT_EQ(r.history.size(), 20u);
		first.push_back(r.history.front().loss.total);
		twentieth.push_back(r.history.back().loss.total);
	}
	std::sort(first.begin(), first.end());
	std::sort(twentieth.begin(), twentieth.end());
	EXPECT_LT(twentieth[5], first[5]);
}

TEST(Train, HistoryAndDeterminism) {
	const auto lg = sample_ssbm({150, 3, 0.1, 1.0, 0.05, 9});
	const Matrix x = input_features(lg.graph, 3, FeatureMode::Synthetic);
	Rng rng(2);
	const auto split = make_split(lg.labels, {0.1, 0.1}, 0.1, rng);
	TrainConfig cfg;
	cfg.max_epochs = 15;
	cfg.seed = 4;
	const auto a = train(lg.graph, x, split, &lg.labels, 3, {}, cfg);
	const auto b = train(lg.graph, x, split, &lg.labels, 3, {}, cfg);
	ASSERT_EQ(a.history.size(), b.history.size());
	for (std::size_t i = 0; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].loss.total, b.history[i].loss.total);
	EXPECT_EQ(a.model.params.head_w, b.model.params.head_w);
	EXPECT_TRUE(std::isfinite(a.history.back().val_ari));
	EXPECT_TRUE(std::isfinite(a.history.back().unhappy));
}
