#pragma once

#include "sssnet/io.hpp"
#include "sssnet/metrics.hpp"
#include "sssnet/spectral.hpp"
#include "sssnet/synthgen.hpp"
#include "sssnet/training.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace sssnet {

namespace fs = std::filesystem;

inline constexpr const char* kSssnetMethod = "SSSNET";

enum class DataKind { Ssbm, Polarized, File };

struct DataConfig {
	DataKind kind = DataKind::Ssbm;
	Index n = 1000;
	int K = 5;
	double p = 0.01;
	double rho = 1.5;
	double eta = 0.0;
	int r = 2;
	Index N = 200;
	bool directed = false;
	std::string edges;
	std::string correlation;
	std::string labels;
	std::string features;
	bool drop_degree_one = false;
};

struct SweepConfig {
	std::string axis = "none";
	std::vector<double> values;
};

struct ExperimentConfig {
	DataConfig data;
	std::vector<std::string> methods{kSssnetMethod};
	ModelConfig model;
	TrainConfig train;
	double seed_ratio = 0.1;
	SplitFractions fractions;
	int graphs = 5;
	int splits = 2;
	SweepConfig sweep;
	std::uint64_t seed = 0;
	int workers = 1;
	std::string output = "out";

	int runs() const { return graphs * splits; }
};

inline const std::vector<std::string>& sweep_axes() {
	static const std::vector<std::string> axes{"none", "eta",     "p",       "rho",   "N",      "seed_ratio",
	                                           "gamma_s", "gamma_t", "alpha", "hop", "hidden", "tau"};
	return axes;
}

/// Splits a run count into graphs x splits: two splits per graph when even.
inline std::pair<int, int> runs_layout(int runs) {
	if (runs < 1) throw InvalidInput("runs must be >= 1");
	return runs % 2 == 0 ? std::pair{runs / 2, 2} : std::pair{runs, 1};
}

// ---------------------------------------------------------------------------
// Config JSON

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> allowed) {
	if (!j.is_object()) throw InvalidInput("config: '" + where + "' must be an object");
	for (const auto& [key, value] : j.items()) {
		bool ok = false;
		for (const char* a : allowed) ok = ok || key == a;
		if (!ok) throw InvalidInput("config: unknown key '" + where + "." + key + "'");
	}
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
	if (!j.contains(key)) return;
	try {
		out = j.at(key).get<T>();
	} catch (const nlohmann::json::exception&) {
		throw InvalidInput("config: '" + where + "." + key + "' has the wrong type");
	}
}

inline std::string to_string(DataKind k) {
	switch (k) {
	case DataKind::Ssbm: return "ssbm";
	case DataKind::Polarized: return "polarized";
	case DataKind::File: return "file";
	}
	return "?";
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
	const auto& d = c.data;
	if (d.kind == DataKind::File) {
		if (d.edges.empty() == d.correlation.empty()) throw InvalidInput("config: file data needs exactly one of edges, correlation");
	} else {
		if (d.n < 2) throw InvalidInput("config: data.n must be >= 2");
		if (!(d.p > 0.0 && d.p <= 1.0)) throw InvalidInput("config: data.p must lie in (0, 1]");
		if (d.rho < 1.0) throw InvalidInput("config: data.rho must be >= 1");
		if (!(d.eta >= 0.0 && d.eta < 0.5)) throw InvalidInput("config: data.eta must lie in [0, 0.5)");
		if (d.kind == DataKind::Ssbm && d.K < 2) throw InvalidInput("config: data.K must be >= 2");
		if (d.kind == DataKind::Polarized && (d.r < 1 || d.N < 2)) throw InvalidInput("config: need r >= 1 and N >= 2");
	}
	if (c.methods.empty()) throw InvalidInput("config: empty method list");
	std::set<std::string> seen;
	for (const auto& m : c.methods) {
		if (m != kSssnetMethod && !parse_baseline(m)) throw InvalidInput("config: unknown method '" + m + "'");
		if (!seen.insert(m).second) throw InvalidInput("config: duplicate method '" + m + "'");
	}
	if (c.model.hidden < 1 || c.model.hop < 0) throw InvalidInput("config: need hidden >= 1 and hop >= 0");
	if (c.model.tau < 0.0) throw InvalidInput("config: tau must be >= 0");
	if (c.train.max_epochs < 1 || c.train.patience < 0) throw InvalidInput("config: need epochs >= 1, patience >= 0");
	if (!(c.train.lr > 0.0)) throw InvalidInput("config: lr must be > 0");
	if (c.seed_ratio < 0.0 || c.seed_ratio > 1.0) throw InvalidInput("config: seed_ratio must lie in [0, 1]");
	if (c.graphs < 1 || c.splits < 1) throw InvalidInput("config: graphs and splits must be >= 1");
	if (c.workers < 1) throw InvalidInput("config: workers must be >= 1");
	if (std::find(sweep_axes().begin(), sweep_axes().end(), c.sweep.axis) == sweep_axes().end()) {
		throw InvalidInput("config: unknown sweep axis '" + c.sweep.axis + "'");
	}
	if (c.sweep.axis != "none" && c.sweep.values.empty()) throw InvalidInput("config: sweep axis without values");
	if (c.sweep.axis == "none" && !c.sweep.values.empty()) throw InvalidInput("config: sweep values without an axis");
	if (d.kind == DataKind::File) {
		for (const char* a : {"eta", "p", "rho", "N"}) {
			if (c.sweep.axis == a) throw InvalidInput("config: cannot sweep generator parameter on file data");
		}
	}
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
	nlohmann::json j;
	const auto& d = c.data;
	j["data"] = {{"kind", detail::to_string(d.kind)}, {"n", d.n}, {"K", d.K}, {"p", d.p}, {"rho", d.rho}, {"eta", d.eta},
	             {"r", d.r}, {"N", d.N}, {"directed", d.directed}, {"edges", d.edges}, {"correlation", d.correlation},
	             {"labels", d.labels}, {"features", d.features}, {"drop_degree_one", d.drop_degree_one}};
	j["methods"] = c.methods;
	j["model"] = {{"hidden", c.model.hidden}, {"hop", c.model.hop}, {"tau", c.model.tau},
	              {"balance_variant", c.model.balance_variant}};
	const auto& t = c.train;
	j["train"] = {{"gamma_s", t.gamma_s},         {"gamma_t", t.gamma_t},           {"alpha", t.alpha},
	              {"lr", t.lr},                   {"weight_decay", t.weight_decay}, {"epochs", t.max_epochs},
	              {"patience", t.patience},       {"triplet_cap", t.triplet_cap},   {"use_pbnc", t.use_pbnc},
	              {"use_supervised", t.use_supervised}, {"triplet_literal", t.triplet_literal},
	              {"seed_ratio", c.seed_ratio},   {"test_ratio", c.fractions.test}, {"val_ratio", c.fractions.val}};
	j["graphs"] = c.graphs;
	j["splits"] = c.splits;
	j["sweep"] = {{"axis", c.sweep.axis}, {"values", c.sweep.values}};
	j["seed"] = c.seed;
	j["workers"] = c.workers;
	j["output"] = c.output;
	return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
	ExperimentConfig c;
	detail::check_keys(j, "config", {"data", "methods", "model", "train", "graphs", "splits", "runs", "sweep", "seed", "workers", "output"});
	if (j.contains("data")) {
		const auto& d = j["data"];
		detail::check_keys(d, "data", {"kind", "n", "K", "p", "rho", "eta", "r", "N", "directed", "edges", "correlation",
		                               "labels", "features", "drop_degree_one"});
		std::string kind = "ssbm";
		detail::read_field(d, "kind", kind, "data");
		if (kind == "ssbm") c.data.kind = DataKind::Ssbm;
		else if (kind == "polarized") c.data.kind = DataKind::Polarized;
		else if (kind == "file") c.data.kind = DataKind::File;
		else throw InvalidInput("config: unknown data.kind '" + kind + "'");
		auto& o = c.data;
		detail::read_field(d, "n", o.n, "data");
		detail::read_field(d, "K", o.K, "data");
		detail::read_field(d, "p", o.p, "data");
		detail::read_field(d, "rho", o.rho, "data");
		detail::read_field(d, "eta", o.eta, "data");
		detail::read_field(d, "r", o.r, "data");
		detail::read_field(d, "N", o.N, "data");
		detail::read_field(d, "directed", o.directed, "data");
		detail::read_field(d, "edges", o.edges, "data");
		detail::read_field(d, "correlation", o.correlation, "data");
		detail::read_field(d, "labels", o.labels, "data");
		detail::read_field(d, "features", o.features, "data");
		detail::read_field(d, "drop_degree_one", o.drop_degree_one, "data");
	}
	detail::read_field(j, "methods", c.methods, "config");
	if (j.contains("model")) {
		const auto& m = j["model"];
		detail::check_keys(m, "model", {"hidden", "hop", "tau", "balance_variant"});
		detail::read_field(m, "hidden", c.model.hidden, "model");
		detail::read_field(m, "hop", c.model.hop, "model");
		detail::read_field(m, "tau", c.model.tau, "model");
		detail::read_field(m, "balance_variant", c.model.balance_variant, "model");
	}
	if (j.contains("train")) {
		const auto& t = j["train"];
		detail::check_keys(t, "train", {"gamma_s", "gamma_t", "alpha", "lr", "weight_decay", "epochs", "patience",
		                                "triplet_cap", "use_pbnc", "use_supervised", "triplet_literal", "seed_ratio",
		                                "test_ratio", "val_ratio"});
		auto& o = c.train;
		detail::read_field(t, "gamma_s", o.gamma_s, "train");
		detail::read_field(t, "gamma_t", o.gamma_t, "train");
		detail::read_field(t, "alpha", o.alpha, "train");
		detail::read_field(t, "lr", o.lr, "train");
		detail::read_field(t, "weight_decay", o.weight_decay, "train");
		detail::read_field(t, "epochs", o.max_epochs, "train");
		detail::read_field(t, "patience", o.patience, "train");
		detail::read_field(t, "triplet_cap", o.triplet_cap, "train");
		detail::read_field(t, "use_pbnc", o.use_pbnc, "train");
		detail::read_field(t, "use_supervised", o.use_supervised, "train");
		detail::read_field(t, "triplet_literal", o.triplet_literal, "train");
		detail::read_field(t, "seed_ratio", c.seed_ratio, "train");
		detail::read_field(t, "test_ratio", c.fractions.test, "train");
		detail::read_field(t, "val_ratio", c.fractions.val, "train");
	}
	detail::read_field(j, "graphs", c.graphs, "config");
	detail::read_field(j, "splits", c.splits, "config");
	if (j.contains("runs")) {
		if (j.contains("graphs") || j.contains("splits")) throw InvalidInput("config: give runs or graphs/splits, not both");
		int runs = 0;
		detail::read_field(j, "runs", runs, "config");
		std::tie(c.graphs, c.splits) = runs_layout(runs);
	}
	if (j.contains("sweep")) {
		detail::check_keys(j["sweep"], "sweep", {"axis", "values"});
		detail::read_field(j["sweep"], "axis", c.sweep.axis, "sweep");
		detail::read_field(j["sweep"], "values", c.sweep.values, "sweep");
	}
	detail::read_field(j, "seed", c.seed, "config");
	detail::read_field(j, "workers", c.workers, "config");
	detail::read_field(j, "output", c.output, "config");
	validate(c);
	return c;
}

inline ExperimentConfig load_config(const std::string& path) {
	std::ifstream in = detail::open_input(path);
	try {
		return config_from_json(nlohmann::json::parse(in));
	} catch (const nlohmann::json::parse_error& e) {
		throw ParseError(path, 0, e.what());
	}
}

/// Copy of `c` with the sweep axis set to `x`.
inline ExperimentConfig at_sweep_point(ExperimentConfig c, double x) {
	const std::string& a = c.sweep.axis;
	if (a == "eta") c.data.eta = x;
	else if (a == "p") c.data.p = x;
	else if (a == "rho") c.data.rho = x;
	else if (a == "N") c.data.N = static_cast<Index>(std::llround(x));
	else if (a == "seed_ratio") c.seed_ratio = x;
	else if (a == "gamma_s") c.train.gamma_s = x;
	else if (a == "gamma_t") c.train.gamma_t = x;
	else if (a == "alpha") c.train.alpha = x;
	else if (a == "hop") c.model.hop = static_cast<int>(std::lround(x));
	else if (a == "hidden") c.model.hidden = static_cast<Index>(std::llround(x));
	else if (a == "tau") c.model.tau = x;
	return c;
}

// ---------------------------------------------------------------------------
// Datasets

struct Dataset {
	SignedGraph graph;
	std::optional<Labels> labels;
	std::optional<Matrix> features;
	int K = 0;
	/// Index of each kept node in the original file numbering.
	std::vector<Index> original_ids;
};

/// Reads an edge list or correlation matrix with optional labels and attributes, optionally
/// drops nodes of support degree <= 1, then keeps the largest connected component.
inline Dataset load_dataset(const DataConfig& d) {
	Dataset ds;
	SignedGraph g = !d.edges.empty() ? read_edge_list(d.edges, d.directed) : read_correlation_csv(d.correlation);
	const Index n = g.size();
	std::optional<Labels> labels;
	std::optional<Matrix> features;
	if (!d.labels.empty()) labels = read_labels(d.labels, n);
	if (!d.features.empty()) features = read_features(d.features, n);
	std::vector<Index> ids(static_cast<std::size_t>(n));
	std::iota(ids.begin(), ids.end(), Index{0});
	if (d.drop_degree_one) {
		const auto deg = support_degrees(g);
		std::vector<Index> keep;
		for (Index i = 0; i < n; ++i) {
			if (deg[i] > 1) keep.push_back(i);
		}
		if (keep.empty()) throw InvalidInput("load_dataset: no node has degree above one");
		g = induced_subgraph(g, keep);
		ids = keep;
	}
	auto lcc = largest_connected_component(g);
	ds.graph = std::move(lcc.graph);
	for (Index i : lcc.new_to_old) ds.original_ids.push_back(ids[i]);
	if (labels) {
		Labels l;
		for (Index i : ds.original_ids) l.push_back((*labels)[i]);
		ds.labels = std::move(l);
	}
	if (features) {
		Matrix f(static_cast<Index>(ds.original_ids.size()), features->cols());
		for (std::size_t i = 0; i < ds.original_ids.size(); ++i) f.row(static_cast<Index>(i)) = features->row(ds.original_ids[i]);
		ds.features = std::move(f);
	}
	ds.K = ds.labels ? cluster_count(*ds.labels) : d.K;
	return ds;
}

inline Dataset make_dataset(const DataConfig& d, std::uint64_t seed) {
	if (d.kind == DataKind::File) return load_dataset(d);
	LabeledGraph lg = d.kind == DataKind::Ssbm ? sample_ssbm({d.n, d.K, d.p, d.rho, d.eta, seed})
	                                           : sample_polarized({d.n, d.r, d.p, d.rho, d.eta, d.N, seed});
	Dataset ds;
	ds.graph = std::move(lg.graph);
	ds.K = lg.K;
	ds.labels = std::move(lg.labels);
	return ds;
}

/// Given attributes win; otherwise generator data gets synthetic and loaded data real eigen-features.
inline Matrix dataset_features(const Dataset& ds, DataKind kind, std::uint64_t seed) {
	if (ds.features) return *ds.features;
	return input_features(ds.graph, ds.K, kind == DataKind::File ? FeatureMode::Real : FeatureMode::Synthetic, seed);
}

// ---------------------------------------------------------------------------
// Runs

struct RunRecord {
	int point = 0;
	double x = 0.0;
	std::string method;
	int run = 0;
	int graph = 0;
	int split = 0;
	bool ok = false;
	std::string error;
	double test_ari = std::numeric_limits<double>::quiet_NaN();
	double val_ari = std::numeric_limits<double>::quiet_NaN();
	double train_ari = std::numeric_limits<double>::quiet_NaN();
	double all_ari = std::numeric_limits<double>::quiet_NaN();
	double test_nmi = std::numeric_limits<double>::quiet_NaN();
	double unhappy = std::numeric_limits<double>::quiet_NaN();
	double bnc = std::numeric_limits<double>::quiet_NaN();
	int epochs = 0;
	int best_epoch = 0;
	double seconds = 0.0;
};

struct AggregateRow {
	std::string method;
	int point = 0;
	double x = 0.0;
	int runs = 0;
	double mean_test_ari = 0.0, se_test_ari = 0.0;
	double mean_test_nmi = 0.0, se_test_nmi = 0.0;
	double mean_unhappy = 0.0, se_unhappy = 0.0;
	double mean_bnc = 0.0, se_bnc = 0.0;
};

struct RunReport {
	std::vector<RunRecord> runs;
	std::vector<AggregateRow> summary;
	int failed = 0;
	int resumed = 0;

	bool all_ok() const { return failed == 0; }
};

struct RunOptions {
	bool resume = false;
	bool write_files = true;
	std::ostream* log = nullptr;
};

/// Seed streams: graphs and splits are shared across methods and sweep points.
struct RunSeeds {
	std::uint64_t graph, split, train, cluster, features;
};

inline RunSeeds run_seeds(std::uint64_t master, int graph, int split, std::size_t method) {
	return {derive_seed(master, 1, graph), derive_seed(master, 2, graph, split), derive_seed(master, 3, graph, split),
	        derive_seed(master, 4, graph, split, method), derive_seed(master, 5, graph)};
}

namespace detail {

inline double subset_ari(const Labels& pred, const Labels& truth, std::span<const Index> nodes) {
	if (nodes.size() < 2) return std::numeric_limits<double>::quiet_NaN();
	return ari(subset_labels(pred, nodes), subset_labels(truth, nodes));
}

inline void score(RunRecord& rec, const Dataset& ds, const Split& split, const Labels& pred, int K) {
	if (ds.labels) {
		const Labels& y = *ds.labels;
		rec.test_ari = subset_ari(pred, y, split.test);
		rec.val_ari = subset_ari(pred, y, split.val);
		rec.train_ari = subset_ari(pred, y, split.train);
		rec.all_ari = ari(pred, y);
		if (split.test.size() >= 2) rec.test_nmi = nmi(subset_labels(pred, split.test), subset_labels(y, split.test));
	}
	if (ds.graph.edge_count() > 0) {
		rec.unhappy = unhappy_ratio(ds.graph, pred);
		rec.bnc = bnc_value(ds.graph, pred, K);
	}
}

inline std::string format_double(double v) {
	if (std::isnan(v)) return "nan";
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

inline double parse_double(const nlohmann::json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline nlohmann::json json_double(double v) { return std::isnan(v) ? nlohmann::json() : nlohmann::json(v); }

inline std::string run_file_name(const RunRecord& r) {
	return "p" + std::to_string(r.point) + "_" + r.method + "_r" + std::to_string(r.run) + ".json";
}

} // namespace detail

inline nlohmann::json to_json(const RunRecord& r) {
	using detail::json_double;
	return {{"point", r.point},         {"x", r.x},
	        {"method", r.method},       {"run", r.run},
	        {"graph", r.graph},         {"split", r.split},
	        {"status", r.ok ? "ok" : "failed"}, {"error", r.error},
	        {"test_ari", json_double(r.test_ari)}, {"val_ari", json_double(r.val_ari)},
	        {"train_ari", json_double(r.train_ari)}, {"all_ari", json_double(r.all_ari)},
	        {"test_nmi", json_double(r.test_nmi)}, {"unhappy_ratio", json_double(r.unhappy)},
	        {"bnc_value", json_double(r.bnc)}, {"epochs", r.epochs},
	        {"best_epoch", r.best_epoch},   {"seconds", r.seconds}};
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
	using detail::parse_double;
	RunRecord r;
	r.point = j.at("point").get<int>();
	r.x = j.at("x").get<double>();
	r.method = j.at("method").get<std::string>();
	r.run = j.at("run").get<int>();
	r.graph = j.at("graph").get<int>();
	r.split = j.at("split").get<int>();
	r.ok = j.at("status").get<std::string>() == "ok";
	r.error = j.at("error").get<std::string>();
	r.test_ari = parse_double(j.at("test_ari"));
	r.val_ari = parse_double(j.at("val_ari"));
	r.train_ari = parse_double(j.at("train_ari"));
	r.all_ari = parse_double(j.at("all_ari"));
	r.test_nmi = parse_double(j.at("test_nmi"));
	r.unhappy = parse_double(j.at("unhappy_ratio"));
	r.bnc = parse_double(j.at("bnc_value"));
	r.epochs = j.at("epochs").get<int>();
	r.best_epoch = j.at("best_epoch").get<int>();
	r.seconds = j.at("seconds").get<double>();
	return r;
}

/// Mean and standard error (sample std / sqrt(count)) over the finite entries.
inline std::pair<double, double> mean_stderr(std::span<const double> values) {
	double sum = 0.0;
	int count = 0;
	for (double v : values) {
		if (std::isnan(v)) continue;
		sum += v;
		++count;
	}
	if (count == 0) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
	const double mean = sum / count;
	if (count < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
	double ss = 0.0;
	for (double v : values) {
		if (!std::isnan(v)) ss += (v - mean) * (v - mean);
	}
	return {mean, std::sqrt(ss / (count - 1)) / std::sqrt(static_cast<double>(count))};
}

inline std::vector<AggregateRow> aggregate(const std::vector<RunRecord>& runs, const std::vector<std::string>& methods,
                                           int points) {
	std::vector<AggregateRow> out;
	for (const auto& m : methods) {
		for (int p = 0; p < points; ++p) {
			AggregateRow row;
			row.method = m;
			row.point = p;
			std::vector<double> a, n, u, b;
			for (const auto& r : runs) {
				if (r.method != m || r.point != p) continue;
				row.x = r.x;
				if (!r.ok) continue;
				++row.runs;
				a.push_back(r.test_ari);
				n.push_back(r.test_nmi);
				u.push_back(r.unhappy);
				b.push_back(r.bnc);
			}
			std::tie(row.mean_test_ari, row.se_test_ari) = mean_stderr(a);
			std::tie(row.mean_test_nmi, row.se_test_nmi) = mean_stderr(n);
			std::tie(row.mean_unhappy, row.se_unhappy) = mean_stderr(u);
			std::tie(row.mean_bnc, row.se_bnc) = mean_stderr(b);
			out.push_back(row);
		}
	}
	return out;
}

inline const char* kResultsHeader =
    "point,x,method,run,graph,split,status,test_ari,val_ari,train_ari,all_ari,test_nmi,unhappy_ratio,bnc_value,epochs,best_epoch";

inline std::string results_csv(const std::vector<RunRecord>& runs) {
	using detail::format_double;
	std::ostringstream out;
	out << kResultsHeader << '\n';
	for (const auto& r : runs) {
		out << r.point << ',' << format_double(r.x) << ',' << r.method << ',' << r.run << ',' << r.graph << ',' << r.split
		    << ',' << (r.ok ? "ok" : "failed") << ',' << format_double(r.test_ari) << ',' << format_double(r.val_ari) << ','
		    << format_double(r.train_ari) << ',' << format_double(r.all_ari) << ',' << format_double(r.test_nmi) << ','
		    << format_double(r.unhappy) << ',' << format_double(r.bnc) << ',' << r.epochs << ',' << r.best_epoch << '\n';
	}
	return out.str();
}

inline std::string summary_csv(const std::vector<AggregateRow>& rows) {
	using detail::format_double;
	std::ostringstream out;
	out << "method,point,x,runs,mean_test_ari,stderr_test_ari,mean_test_nmi,stderr_test_nmi,mean_unhappy_ratio,"
	       "stderr_unhappy_ratio,mean_bnc_value,stderr_bnc_value\n";
	for (const auto& r : rows) {
		out << r.method << ',' << r.point << ',' << format_double(r.x) << ',' << r.runs << ','
		    << format_double(r.mean_test_ari) << ',' << format_double(r.se_test_ari) << ','
		    << format_double(r.mean_test_nmi) << ',' << format_double(r.se_test_nmi) << ','
		    << format_double(r.mean_unhappy) << ',' << format_double(r.se_unhappy) << ',' << format_double(r.mean_bnc)
		    << ',' << format_double(r.se_bnc) << '\n';
	}
	return out.str();
}

inline nlohmann::json series_json(const std::vector<AggregateRow>& rows, const ExperimentConfig& c) {
	using detail::json_double;
	nlohmann::json j;
	j["axis"] = c.sweep.axis;
	j["metric"] = "test_ari";
	j["series"] = nlohmann::json::array();
	for (const auto& m : c.methods) {
		nlohmann::json s{{"method", m}, {"x", nlohmann::json::array()}, {"y", nlohmann::json::array()},
		                 {"err", nlohmann::json::array()}};
		for (const auto& r : rows) {
			if (r.method != m) continue;
			s["x"].push_back(r.x);
			s["y"].push_back(json_double(r.mean_test_ari));
			s["err"].push_back(json_double(r.se_test_ari));
		}
		j["series"].push_back(s);
	}
	return j;
}

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
	const fs::path tmp = path.string() + ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary);
		if (!out) throw InvalidInput("cannot write " + tmp.string());
		out << text;
		if (!out) throw InvalidInput("failed writing " + tmp.string());
	}
	fs::rename(tmp, path);
}

/// One (sweep point, graph) unit: builds the data once, then every split and method.
struct Task {
	int point;
	double x;
	int graph;
};

inline std::string history_file_name(const RunRecord& r) {
	return "p" + std::to_string(r.point) + "_" + r.method + "_r" + std::to_string(r.run) + "_history.csv";
}

/// `history_dir` empty: training histories are not written.
inline void execute_task(const ExperimentConfig& base, const Task& task, std::vector<RunRecord*> slots,
                         const fs::path& history_dir) {
	const ExperimentConfig cfg = at_sweep_point(base, task.x);
	std::optional<Dataset> ds;
	std::optional<Matrix> features;
	std::string data_error;
	try {
		const RunSeeds s0 = run_seeds(cfg.seed, task.graph, 0, 0);
		ds = make_dataset(cfg.data, s0.graph);
		if (ds->K < 1) throw InvalidInput("cluster count unknown; set data.K or give labels");
		features = dataset_features(*ds, cfg.data.kind, s0.features);
	} catch (const std::exception& e) {
		data_error = e.what();
	}
	for (RunRecord* rec : slots) {
		const auto start = std::chrono::steady_clock::now();
		if (!data_error.empty()) {
			rec->ok = false;
			rec->error = data_error;
			continue;
		}
		try {
			const std::size_t method_index =
			    static_cast<std::size_t>(std::find(cfg.methods.begin(), cfg.methods.end(), rec->method) - cfg.methods.begin());
			const RunSeeds seeds = run_seeds(cfg.seed, rec->graph, rec->split, method_index);
			Rng split_rng(seeds.split);
			const Split split = ds->labels ? make_split(*ds->labels, cfg.fractions, cfg.seed_ratio, split_rng)
			                               : unlabeled_split(ds->graph.size());
			Labels pred;
			if (rec->method == kSssnetMethod) {
				TrainConfig tc = cfg.train;
				tc.seed = seeds.train;
				const Labels* labels = ds->labels ? &*ds->labels : nullptr;
				auto result = train(ds->graph, *features, split, labels, ds->K, cfg.model, tc);
				if (result.diverged) throw NumericalError("training diverged: " + result.error);
				pred = predict(result.model, ds->graph, *features, cfg.model.tau).hard;
				if (!history_dir.empty()) {
					std::ostringstream hist;
					write_history_csv(hist, result.history);
					write_text(history_dir / history_file_name(*rec), hist.str());
				}
				rec->epochs = static_cast<int>(result.history.size());
				rec->best_epoch = result.best_epoch;
			} else {
				Rng rng(seeds.cluster);
				pred = baseline_cluster(ds->graph, ds->K, *parse_baseline(rec->method), rng);
			}
			score(*rec, *ds, split, pred, ds->K);
			rec->ok = true;
		} catch (const std::exception& e) {
			rec->ok = false;
			rec->error = e.what();
		}
		rec->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
	}
}

} // namespace detail

/// Runs every (sweep point, method, graph, split) combination and writes the outputs.
inline RunReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
	validate(cfg);
	const fs::path out_dir = cfg.output;
	const fs::path runs_dir = out_dir / "runs";
	if (opt.write_files) {
		std::error_code ec;
		fs::create_directories(runs_dir, ec);
		if (ec || !fs::is_directory(runs_dir)) throw InvalidInput("cannot create output directory " + runs_dir.string());
		detail::write_text(out_dir / "config.json", to_json(cfg).dump(2) + "\n");
	}
	const std::vector<double> xs = cfg.sweep.axis == "none" ? std::vector<double>{0.0} : cfg.sweep.values;
	const int points = static_cast<int>(xs.size());

	RunReport report;
	report.runs.reserve(static_cast<std::size_t>(points) * cfg.methods.size() * static_cast<std::size_t>(cfg.runs()));
	std::vector<std::vector<std::size_t>> task_slots;
	std::vector<detail::Task> tasks;
	for (int p = 0; p < points; ++p) {
		for (int g = 0; g < cfg.graphs; ++g) {
			std::vector<std::size_t> pending;
			for (const auto& m : cfg.methods) {
				for (int s = 0; s < cfg.splits; ++s) {
					RunRecord r;
					r.point = p;
					r.x = xs[p];
					r.method = m;
					r.graph = g;
					r.split = s;
					r.run = g * cfg.splits + s;
					bool done = false;
					const fs::path file = runs_dir / detail::run_file_name(r);
					if (opt.resume && opt.write_files && fs::exists(file)) {
						try {
							std::ifstream in(file);
							RunRecord prev = run_record_from_json(nlohmann::json::parse(in));
							if (prev.ok && prev.method == m && prev.point == p && prev.run == r.run && prev.x == r.x) {
								r = prev;
								done = true;
								++report.resumed;
							}
						} catch (const std::exception&) {
							// unreadable record: run again
						}
					}
					report.runs.push_back(r);
					if (!done) pending.push_back(report.runs.size() - 1);
				}
			}
			if (!pending.empty()) {
				tasks.push_back({p, xs[p], g});
				task_slots.push_back(std::move(pending));
			}
		}
	}
	std::mutex log_mutex;
	std::atomic<std::size_t> next{0};
	auto worker = [&] {
		for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
			std::vector<RunRecord*> slots;
			for (std::size_t i : task_slots[t]) slots.push_back(&report.runs[i]);
			detail::execute_task(cfg, tasks[t], slots, opt.write_files ? runs_dir : fs::path());
			for (RunRecord* r : slots) {
				if (opt.write_files) {
					try {
						detail::write_text(runs_dir / detail::run_file_name(*r), to_json(*r).dump(2) + "\n");
					} catch (const std::exception& e) {
						r->ok = false;
						r->error = e.what();
					}
				}
				if (opt.log != nullptr) {
					std::lock_guard lock(log_mutex);
					*opt.log << "point " << r->point << " " << r->method << " run " << r->run << ": "
					         << (r->ok ? "ok test_ari=" + detail::format_double(r->test_ari) : "FAILED " + r->error) << '\n';
				}
			}
		}
	};
	const int nworkers = std::min<int>(cfg.workers, std::max<int>(1, static_cast<int>(tasks.size())));
	if (nworkers <= 1) {
		worker();
	} else {
		std::vector<std::thread> pool;
		for (int i = 0; i < nworkers; ++i) pool.emplace_back(worker);
		for (auto& t : pool) t.join();
	}

	std::stable_sort(report.runs.begin(), report.runs.end(), [&](const RunRecord& a, const RunRecord& b) {
		if (a.point != b.point) return a.point < b.point;
		const auto ia = std::find(cfg.methods.begin(), cfg.methods.end(), a.method);
		const auto ib = std::find(cfg.methods.begin(), cfg.methods.end(), b.method);
		if (ia != ib) return ia < ib;
		return a.run < b.run;
	});
	for (const auto& r : report.runs) report.failed += r.ok ? 0 : 1;
	report.summary = aggregate(report.runs, cfg.methods, points);

	if (opt.write_files) {
		detail::write_text(out_dir / "results.csv", results_csv(report.runs));
		detail::write_text(out_dir / "summary.csv", summary_csv(report.summary));
		detail::write_text(out_dir / "series.json", series_json(report.summary, cfg).dump(2) + "\n");
		std::ostringstream timing;
		timing << "point,method,run,seconds\n";
		for (const auto& r : report.runs) {
			timing << r.point << ',' << r.method << ',' << r.run << ',' << detail::format_double(r.seconds) << '\n';
		}
		detail::write_text(out_dir / "timings.csv", timing.str());
	}
	return report;
}

} // namespace sssnet
