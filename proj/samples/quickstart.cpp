// Train SSSNET on one SSBM graph, compare with SPONGE, save the model.
#include "sssnet/sssnet.hpp"

#include <iostream>

using namespace sssnet;

int main() {
	const LabeledGraph lg = sample_ssbm({1000, 5, 0.02, 1.5, 0.05, 7});
	const Matrix x = input_features(lg.graph, lg.K, FeatureMode::Synthetic);

	Rng split_rng(1);
	const Split split = make_split(lg.labels, {}, 0.1, split_rng);

	TrainConfig tc;
	tc.seed = 2;
	const ModelConfig mc;
	const TrainResult result = train(lg.graph, x, split, &lg.labels, lg.K, mc, tc);
	const Labels pred = predict(result.model, lg.graph, x, mc.tau).hard;

	std::cout << "epochs run: " << result.history.size() << ", selected epoch " << result.best_epoch << '\n';
	std::cout << "SSSNET test ARI " << ari(subset_labels(pred, split.test), subset_labels(lg.labels, split.test))
	          << ", unhappy ratio " << unhappy_ratio(lg.graph, pred) << '\n';

	Rng rng(3);
	const Labels sponge = baseline_cluster(lg.graph, lg.K, BaselineMethod::SPONGE, rng);
	std::cout << "SPONGE test ARI " << ari(subset_labels(sponge, split.test), subset_labels(lg.labels, split.test)) << '\n';

	save_checkpoint(result.model, "quickstart_model.json");
	const SimpaModel restored = load_checkpoint("quickstart_model.json");
	std::cout << "checkpoint restored, " << restored.parameter_count() << " parameters\n";
}
