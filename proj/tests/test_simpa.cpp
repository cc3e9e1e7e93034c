#include "oracles.hpp"
#include "sssnet/simpa.hpp"
#include "sssnet/synthgen.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace sssnet;

namespace {

std::vector<Matrix> random_hidden(const ModelShape& s, Index n, Rng& rng) {
	std::vector<Matrix> h;
	for (int c = 0; c < s.channel_count(); ++c) h.push_back(testutil::random_matrix(n, s.hidden, rng));
	return h;
}

SimpaModel random_model(const ModelShape& s, Rng& rng) {
	SimpaModel m = init_model(s, rng.next());
	for (auto& w : m.params.omega) {
		for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1.0, 1.0);
	}
	for (Index i = 0; i < m.params.balance.size(); ++i) m.params.balance[i] = rng.uniform(-1.0, 1.0);
	return m;
}

} // namespace

TEST(ChannelCounts, SmallHops) {
	EXPECT_EQ(channel_counts(0), std::make_pair(1, 0));
	EXPECT_EQ(channel_counts(1), std::make_pair(2, 1));
	EXPECT_EQ(channel_counts(2), std::make_pair(3, 3));
	EXPECT_EQ(enemy_exponents(2), (std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {0, 1}}));
}

TEST(InitModel, ShapesAndDeterminism) {
	const ModelShape s{5, 8, 3, 2, true, false};
	const auto a = init_model(s, 4), b = init_model(s, 4);
	EXPECT_EQ(a.params.head_w, b.params.head_w);
	EXPECT_EQ(a.params.mlp[3].w2, b.params.mlp[3].w2);
	ASSERT_EQ(a.params.omega.size(), 4u);
	for (const auto& w : a.params.omega) {
		EXPECT_EQ(w.size(), 3);
		EXPECT_EQ(w, Vector::Ones(3));
	}
	const auto u = init_model({5, 8, 3, 2, false, false}, 4);
	EXPECT_EQ(u.params.mlp.size(), 2u);
	EXPECT_EQ(u.params.head_w.rows(), 16);
	const double bound = 1.0 / std::sqrt(5.0);
	EXPECT_LE(a.params.mlp[0].w1.cwiseAbs().maxCoeff(), bound);
}

TEST(Mlp, ZeroInputAndRelu) {
	MlpStack s{Matrix::Ones(2, 3), Matrix::Ones(3, 3)};
	EXPECT_EQ(mlp_forward(Matrix::Zero(4, 2), s, false).cwiseAbs().sum(), 0.0);
	MlpStack unit{Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
	EXPECT_EQ(mlp_forward(Matrix::Constant(1, 1, -2.0), unit, false)(0, 0), 0.0);
	EXPECT_THROW(mlp_forward(Matrix::Zero(4, 3), s, false), InvalidInput);
}

TEST(Mlp, EvalIsDeterministicAndDropoutScales) {
	Rng rng(1);
	MlpStack s{testutil::random_matrix(4, 6, rng), testutil::random_matrix(6, 6, rng)};
	const Matrix x = testutil::random_matrix(10, 4, rng);
	EXPECT_EQ(mlp_forward(x, s, false), mlp_forward(x, s, false));
	MlpCache cache;
	mlp_forward(x, s, true, &rng, &cache);
	for (Index i = 0; i < cache.mask.size(); ++i) {
		const double v = cache.mask.data()[i];
		EXPECT_TRUE(v == 0.0 || v == 2.0);
	}
}

TEST(Simpa, HopZeroIsIdentityOnly) {
	Rng rng(2);
	const auto g = testutil::random_signed_graph(15, 0.3, true, rng);
	const auto ch = normalized_channels(g);
	const ModelShape s{3, 4, 2, 0, true, false};
	const auto model = random_model(s, rng);
	const auto h = random_hidden(s, 15, rng);
	const Matrix z = simpa_forward(ch, h, model);
	EXPECT_EQ(z.middleCols(0, 4), model.params.omega[0][0] * h[0]);
	EXPECT_EQ(z.middleCols(4, 4).cwiseAbs().sum(), 0.0);
	EXPECT_EQ(z.middleCols(12, 4).cwiseAbs().sum(), 0.0);
}

TEST(Simpa, ZeroWeightsGiveZero) {
	Rng rng(3);
	const auto g = testutil::random_signed_graph(15, 0.3, false, rng);
	const ModelShape s{3, 4, 2, 2, false, false};
	auto model = random_model(s, rng);
	for (auto& w : model.params.omega) w.setZero();
	EXPECT_EQ(simpa_forward(normalized_channels(g), random_hidden(s, 15, rng), model).cwiseAbs().sum(), 0.0);
}

TEST(Simpa, MatchesDenseOracle) {
	Rng rng(4);
	for (int trial = 0; trial < 40; ++trial) {
		const Index n = 5 + static_cast<Index>(rng.below(26));
		const int hop = 1 + static_cast<int>(rng.below(3));
		const bool directed = trial % 2 == 0;
		const auto g = testutil::random_signed_graph(n, 0.2, directed, rng);
		const auto ch = normalized_channels(g);
		const ModelShape s{3, 5, 2, hop, directed, false};
		const auto model = random_model(s, rng);
		const auto h = random_hidden(s, n, rng);
		const Matrix fast = simpa_forward(ch, h, model);
		const Matrix slow = oracle::dense_simpa(ch, h, model);
		EXPECT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-10) << "n=" << n << " h=" << hop;
	}
}

TEST(Simpa, WeightListLengthChecked) {
	Rng rng(5);
	const auto g = testutil::random_signed_graph(10, 0.3, false, rng);
	const ModelShape s{3, 4, 2, 2, false, false};
	auto model = random_model(s, rng);
	model.params.omega[1] = Vector::Ones(2);
	EXPECT_THROW(simpa_forward(normalized_channels(g), random_hidden(s, 10, rng), model), InvalidInput);
}

TEST(Simpa, LinearInHidden) {
	Rng rng(6);
	const auto g = testutil::random_signed_graph(20, 0.2, true, rng);
	const auto ch = normalized_channels(g);
	const ModelShape s{3, 4, 2, 3, true, false};
	const auto model = random_model(s, rng);
	auto h = random_hidden(s, 20, rng);
	const Matrix z = simpa_forward(ch, h, model);
	for (auto& m : h) m *= 2.5;
	EXPECT_LT((simpa_forward(ch, h, model) - 2.5 * z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Simpa, PermutationEquivariant) {
	Rng rng(7);
	const Index n = 25;
	const auto g = testutil::random_signed_graph(n, 0.2, true, rng);
	std::vector<Index> perm(n);
	std::iota(perm.begin(), perm.end(), Index{0});
	rng.shuffle(std::span<Index>(perm));
	std::vector<Edge> moved;
	for (const Edge& e : g.edges()) moved.push_back({perm[e.src], perm[e.dst], e.weight});
	const auto pg = build_signed_graph(moved, n, true);
	const ModelShape s{3, 4, 2, 2, true, false};
	const auto model = random_model(s, rng);
	const auto h = random_hidden(s, n, rng);
	std::vector<Matrix> ph;
	for (const auto& m : h) {
		Matrix p(n, m.cols());
		for (Index i = 0; i < n; ++i) p.row(perm[i]) = m.row(i);
		ph.push_back(p);
	}
	const Matrix z = simpa_forward(normalized_channels(g), h, model);
	const Matrix pz = simpa_forward(normalized_channels(pg), ph, model);
	for (Index i = 0; i < n; ++i) EXPECT_LT((pz.row(perm[i]) - z.row(i)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BalanceVariant, NoNegativeEdgesMatchesSimpa) {
	Rng rng(8);
	std::vector<Edge> edges;
	for (Index i = 0; i < 12; ++i) edges.push_back({i, (i + 1) % 12, 1.0});
	const auto g = build_signed_graph(edges, 12, true);
	const auto ch = normalized_channels(g);
	const ModelShape plain{3, 4, 2, 2, true, false};
	ModelShape with = plain;
	with.balance_variant = true;
	auto a = random_model(plain, rng);
	auto b = init_model(with, 1);
	b.params.mlp = a.params.mlp;
	b.params.omega = a.params.omega;
	const auto h = random_hidden(plain, 12, rng);
	EXPECT_EQ(simpa_forward(ch, h, a), balance_variant_forward(ch, h, b));
	EXPECT_EQ(b.parameter_count() - a.parameter_count(), 2);
	ModelShape und = with;
	und.directed = false;
	ModelShape und_plain = plain;
	und_plain.directed = false;
	EXPECT_EQ(init_model(und, 1).parameter_count() - init_model(und_plain, 1).parameter_count(), 1);
}

TEST(BalanceVariant, TwoNegativeHopsBecomeFriends) {
	// s=0 -(-)-> m=1 -(-)-> t=2
	const std::vector<Edge> edges{{0, 1, -1.0}, {1, 2, -1.0}};
	const auto ch = normalized_channels(build_signed_graph(edges, 3, true));
	ModelShape s{1, 1, 2, 2, true, true};
	auto model = init_model(s, 1);
	std::vector<Matrix> h(4, Matrix::Zero(3, 1));
	h[0](2, 0) = 1.0; // feature only on t
	const Matrix plain_z = [&] {
		ModelShape p = s;
		p.balance_variant = false;
		auto m = init_model(p, 1);
		return simpa_forward(ch, h, m);
	}();
	const Matrix z = balance_variant_forward(ch, h, model);
	EXPECT_EQ(plain_z(0, 0), 0.0);
	EXPECT_EQ(z(0, 0), 1.0);
	s.hop = 3;
	EXPECT_THROW(init_model(s, 1), InvalidInput);
}

TEST(BalanceVariant, MatchesDenseOracle) {
	Rng rng(9);
	for (int trial = 0; trial < 10; ++trial) {
		const auto g = testutil::random_signed_graph(18, 0.25, trial % 2 == 0, rng);
		const auto ch = normalized_channels(g);
		const ModelShape s{3, 4, 2, 2, trial % 2 == 0, true};
		const auto model = random_model(s, rng);
		const auto h = random_hidden(s, 18, rng);
		EXPECT_LT((balance_variant_forward(ch, h, model) - oracle::dense_simpa(ch, h, model)).cwiseAbs().maxCoeff(), 1e-10);
	}
}

TEST(Head, SoftmaxAndArgmax) {
	SimpaModel m = init_model({1, 1, 4, 0, false, false}, 1);
	m.params.head_w.setZero();
	m.params.head_b.setZero();
	const auto a = head_forward(Matrix::Ones(1, 2), m);
	EXPECT_EQ(a.probabilities, Matrix::Constant(1, 4, 0.25));
	EXPECT_EQ(a.hard[0], 0);
	Matrix logits(1, 3);
	logits << 10, 0, 0;
	EXPECT_EQ(row_argmax(row_softmax(logits))[0], 0);
	Matrix shifted = logits.array() + 123.0;
	EXPECT_LT((row_softmax(shifted) - row_softmax(logits)).cwiseAbs().maxCoeff(), 1e-12);
	logits(0, 1) = std::numeric_limits<double>::quiet_NaN();
	EXPECT_THROW(row_softmax(logits), NumericalError);
}

TEST(Head, RowsAreStochastic) {
	Rng rng(10);
	const Matrix logits = testutil::random_matrix(50, 5, rng, 20.0);
	const Matrix p = row_softmax(logits);
	for (Index i = 0; i < p.rows(); ++i) EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
	EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(Simpa, WorkspaceStaysLinearAtTenThousandNodes) {
	SsbmParams p{10000, 5, 0.001, 1.5, 0.1, 3};
	const auto lg = sample_ssbm(p, {false, false});
	const auto ch = normalized_channels(lg.graph);
	Rng rng(11);
	const ModelShape s{5, 32, 5, 2, false, false};
	const auto model = init_model(s, 1);
	const auto h = random_hidden(s, 10000, rng);
	WorkspaceProbe probe;
	const Matrix z = simpa_forward(ch, h, model, nullptr, &probe);
	EXPECT_EQ(z.rows(), 10000);
	// the output itself is n x 2d; nothing may approach n x n
	EXPECT_LE(probe.largest_buffer, 10000 * s.embedding_dim());
	EXPECT_LE(probe.total_elements, 10 * 10000 * s.embedding_dim());
	EXPECT_LT(probe.largest_buffer, 10000LL * 10000LL / 100);
}

TEST(Simpa, ForwardTimeScalesWithEdges) {
	const Index n = 10000;
	auto time_forward = [&](double p) {
		const auto g = sample_signed_er(n, p, 5);
		const auto ch = normalized_channels(g);
		Rng rng(12);
		const ModelShape s{5, 32, 5, 2, false, false};
		const auto model = init_model(s, 1);
		const auto h = random_hidden(s, n, rng);
		double best = 1e300;
		for (int rep = 0; rep < 5; ++rep) {
			const auto t0 = std::chrono::steady_clock::now();
			const Matrix z = simpa_forward(ch, h, model);
			const auto t1 = std::chrono::steady_clock::now();
			best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
			EXPECT_EQ(z.rows(), n);
		}
		return best;
	};
	const double single = time_forward(0.004);
	const double twice = time_forward(0.008);
	const double ratio = twice / single;
	EXPECT_LE(ratio, 2.5);
	EXPECT_GE(ratio, 1.5);
	std::cout << "forward time ratio for doubled edges: " << ratio << '\n';
}
