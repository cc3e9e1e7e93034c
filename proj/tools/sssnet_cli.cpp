#include "sssnet/sssnet.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace sssnet;

namespace {

struct Flags {
	std::string config, out, kind, edges, correlation, labels, features, axis;
	Index n = 0, N = 0, hidden = 0;
	int K = 0, r = 0, hop = 0, epochs = 0, patience = 0, runs = 0, workers = 0;
	double p = 0, rho = 0, eta = 0, tau = 0, gamma_s = 0, gamma_t = 0, alpha = 0, lr = 0, seed_ratio = 0;
	std::uint64_t seed = 0;
	std::vector<std::string> methods;
	std::vector<double> values;
	bool directed = false, triplet_literal = false, balance_variant = false, no_pbnc = false, drop_degree_one = false;
	bool resume = false, quiet = false;
};

void add_data_flags(CLI::App* app, Flags& f) {
	app->add_option("--kind", f.kind, "data source: ssbm, polarized or file")->check(CLI::IsMember({"ssbm", "polarized", "file"}));
	app->add_option("--n", f.n, "number of nodes");
	app->add_option("--K", f.K, "number of clusters (SSBM)");
	app->add_option("--p", f.p, "edge probability");
	app->add_option("--rho", f.rho, "largest/smallest block size ratio");
	app->add_option("--eta", f.eta, "sign flip probability");
	app->add_option("--r", f.r, "planted communities (polarized)");
	app->add_option("--N", f.N, "total community size (polarized)");
	app->add_option("--seed", f.seed, "master seed");
}

void add_run_flags(CLI::App* app, Flags& f) {
	add_data_flags(app, f);
	app->add_option("--config", f.config, "experiment JSON; flags override its fields")->check(CLI::ExistingFile);
	app->add_option("--edges", f.edges, "edge list file (src dst weight)");
	app->add_option("--correlation", f.correlation, "correlation matrix CSV");
	app->add_option("--labels", f.labels, "label file (node label)");
	app->add_option("--features", f.features, "node attribute file");
	app->add_flag("--directed", f.directed, "treat the edge list as directed");
	app->add_flag("--drop-degree-one", f.drop_degree_one, "remove nodes of degree at most one before the LCC");
	app->add_option("--hop", f.hop, "SIMPA hop count h");
	app->add_option("--hidden", f.hidden, "hidden width d");
	app->add_option("--tau", f.tau, "self-loop weight for positive channels");
	app->add_option("--gamma-s", f.gamma_s, "supervised loss weight");
	app->add_option("--gamma-t", f.gamma_t, "triplet loss weight");
	app->add_option("--alpha", f.alpha, "triplet margin");
	app->add_option("--lr", f.lr, "Adam learning rate");
	app->add_option("--seed-ratio", f.seed_ratio, "fraction of training nodes with known labels");
	app->add_option("--epochs", f.epochs, "maximum epochs");
	app->add_option("--patience", f.patience, "early-stopping patience");
	app->add_option("--method", f.methods, "SSSNET and/or baselines: A sns dns L L_sym BNC BRC SPONGE SPONGE_sym")
	    ->delimiter(',');
	app->add_option("--runs", f.runs, "repetitions (graphs x splits)");
	app->add_flag("--triplet-literal", f.triplet_literal, "use the triplet hinge with swapped similarities");
	app->add_flag("--balance-variant", f.balance_variant, "add the two-negative-hop friend term");
	app->add_flag("--no-pbnc", f.no_pbnc, "drop the self-supervised PBNC term");
	app->add_option("--out", f.out, "output directory");
	app->add_flag("--resume", f.resume, "skip runs already completed in the output directory");
	app->add_option("--workers", f.workers, "parallel workers");
	app->add_flag("--quiet", f.quiet, "no per-run log");
}

bool given(const CLI::App* app, const char* name) {
	const CLI::Option* opt = app->get_option_no_throw(name);
	return opt != nullptr && opt->count() > 0;
}

template <typename T>
void set_if(const CLI::App* app, const char* name, T& field, const T& value) {
	if (given(app, name)) field = value;
}

ExperimentConfig build_config(const CLI::App* app, const Flags& f) {
	ExperimentConfig c = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
	if (given(app, "--kind")) {
		c.data.kind = f.kind == "ssbm" ? DataKind::Ssbm : f.kind == "polarized" ? DataKind::Polarized : DataKind::File;
	}
	if (given(app, "--edges") || given(app, "--correlation")) c.data.kind = DataKind::File;
	set_if(app, "--n", c.data.n, f.n);
	set_if(app, "--K", c.data.K, f.K);
	set_if(app, "--p", c.data.p, f.p);
	set_if(app, "--rho", c.data.rho, f.rho);
	set_if(app, "--eta", c.data.eta, f.eta);
	set_if(app, "--r", c.data.r, f.r);
	set_if(app, "--N", c.data.N, f.N);
	set_if(app, "--seed", c.seed, f.seed);
	set_if(app, "--edges", c.data.edges, f.edges);
	set_if(app, "--correlation", c.data.correlation, f.correlation);
	set_if(app, "--labels", c.data.labels, f.labels);
	set_if(app, "--features", c.data.features, f.features);
	set_if(app, "--directed", c.data.directed, f.directed);
	set_if(app, "--drop-degree-one", c.data.drop_degree_one, f.drop_degree_one);
	set_if(app, "--hop", c.model.hop, f.hop);
	set_if(app, "--hidden", c.model.hidden, f.hidden);
	set_if(app, "--tau", c.model.tau, f.tau);
	set_if(app, "--balance-variant", c.model.balance_variant, f.balance_variant);
	set_if(app, "--gamma-s", c.train.gamma_s, f.gamma_s);
	set_if(app, "--gamma-t", c.train.gamma_t, f.gamma_t);
	set_if(app, "--alpha", c.train.alpha, f.alpha);
	set_if(app, "--lr", c.train.lr, f.lr);
	set_if(app, "--epochs", c.train.max_epochs, f.epochs);
	set_if(app, "--patience", c.train.patience, f.patience);
	set_if(app, "--triplet-literal", c.train.triplet_literal, f.triplet_literal);
	if (given(app, "--no-pbnc")) c.train.use_pbnc = !f.no_pbnc;
	set_if(app, "--seed-ratio", c.seed_ratio, f.seed_ratio);
	set_if(app, "--method", c.methods, f.methods);
	if (given(app, "--runs")) std::tie(c.graphs, c.splits) = runs_layout(f.runs);
	set_if(app, "--out", c.output, f.out);
	set_if(app, "--workers", c.workers, f.workers);
	return c;
}

int execute(const ExperimentConfig& c, const Flags& f) {
	validate(c);
	RunOptions opt;
	opt.resume = f.resume;
	opt.log = f.quiet ? nullptr : &std::cerr;
	const RunReport report = run_experiment(c, opt);
	for (const auto& row : report.summary) {
		std::cout << row.method << "  x=" << row.x << "  runs=" << row.runs << "  test ARI " << row.mean_test_ari << " +- "
		          << row.se_test_ari << "  unhappy " << row.mean_unhappy << '\n';
	}
	if (report.resumed > 0) std::cerr << report.resumed << " runs resumed from disk\n";
	if (!report.all_ok()) {
		std::cerr << report.failed << " of " << report.runs.size() << " runs failed; see " << c.output << "/runs\n";
		return 1;
	}
	return 0;
}

int generate(const CLI::App* app, const Flags& f) {
	ExperimentConfig c = build_config(app, f);
	if (c.data.kind == DataKind::File) throw InvalidInput("generate: choose --kind ssbm or polarized");
	validate(c);
	const Dataset ds = make_dataset(c.data, c.seed);
	const fs::path out = f.out.empty() ? fs::path("data") : fs::path(f.out);
	fs::create_directories(out);
	std::ofstream edges(out / "edges.txt");
	std::ofstream labels(out / "labels.txt");
	if (!edges || !labels) throw InvalidInput("cannot write into " + out.string());
	write_edge_list(edges, ds.graph);
	write_labels(labels, *ds.labels);
	std::cout << "wrote " << ds.graph.size() << " nodes, " << ds.graph.edge_count() << " edges, K=" << ds.K << " to "
	          << out.string() << '\n';
	return 0;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Signed network clustering: SSSNET and spectral baselines"};
	app.require_subcommand(1);
	Flags gen_flags, run_flags, sweep_flags;

	auto* gen = app.add_subcommand("generate", "sample an SSBM or polarized SSBM graph to edges.txt / labels.txt");
	add_data_flags(gen, gen_flags);
	gen->add_option("--out", gen_flags.out, "output directory");

	auto* run = app.add_subcommand("run", "run methods on one data setting");
	add_run_flags(run, run_flags);

	auto* sweep = app.add_subcommand("sweep", "run methods along a parameter grid");
	add_run_flags(sweep, sweep_flags);
	sweep_flags.axis = "eta";
	sweep_flags.values = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3};
	sweep->add_option("--axis", sweep_flags.axis, "swept parameter")->check(CLI::IsMember(sweep_axes()))->capture_default_str();
	sweep->add_option("--values", sweep_flags.values, "grid values")->delimiter(',')->capture_default_str();

	CLI11_PARSE(app, argc, argv);
	try {
		if (*gen) return generate(gen, gen_flags);
		if (*run) return execute(build_config(run, run_flags), run_flags);
		ExperimentConfig c = build_config(sweep, sweep_flags);
		if (given(sweep, "--axis") || given(sweep, "--values") || c.sweep.axis == "none") {
			c.sweep.axis = sweep_flags.axis;
			c.sweep.values = sweep_flags.values;
		}
		return execute(c, sweep_flags);
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 2;
	}
}
