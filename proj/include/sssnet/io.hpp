#pragma once

// Text formats:
//   edge list   "src<TAB>dst<TAB>weight" per line, 0-based ids, '#' comments
//   labels      "node<TAB>cluster" per line
//   features    one node per line, whitespace/comma separated reals
//   correlation CSV of n rows x n reals

#include "sssnet/graph.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sssnet {

class ParseError : public std::runtime_error {
  public:
	ParseError(const std::string& source, std::size_t line, const std::string& what)
	    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), m_line(line) {}
	std::size_t line() const { return m_line; }

  private:
	std::size_t m_line;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string_view::npos) return {};
	const auto e = s.find_last_not_of(" \t\r\n");
	return s.substr(b, e - b + 1);
}

inline bool skip_line(std::string_view s) { return s.empty() || s.front() == '#'; }

inline std::vector<std::string_view> split_fields(std::string_view s, std::string_view seps) {
	std::vector<std::string_view> out;
	std::size_t pos = 0;
	while (pos <= s.size()) {
		const auto next = s.find_first_of(seps, pos);
		const auto field = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
		if (!field.empty()) out.push_back(field);
		if (next == std::string_view::npos) break;
		pos = next + 1;
	}
	return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
	if constexpr (std::is_floating_point_v<T>) {
		// from_chars for doubles is unreliable on older toolchains; strtod on a copy
		std::string copy(s);
		char* end = nullptr;
		out = std::strtod(copy.c_str(), &end);
		return end == copy.c_str() + copy.size() && !copy.empty();
	} else {
		auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
		return ec == std::errc() && p == s.data() + s.size();
	}
}

inline std::ifstream open_input(const std::string& path) {
	std::ifstream in(path);
	if (!in) throw std::runtime_error("cannot open " + path);
	return in;
}

} // namespace detail

/// Parses an edge list. When n < 0 the node count is max id + 1.
inline SignedGraph read_edge_list(std::istream& in, bool directed, Index n = -1, const std::string& source = "<edges>") {
	std::vector<Edge> edges;
	std::string line;
	std::size_t lineno = 0;
	Index max_id = -1;
	while (std::getline(in, line)) {
		++lineno;
		const auto s = detail::trim(line);
		if (s.starts_with("# nodes ") && n < 0) {
			// header written by write_edge_list; keeps trailing isolated nodes
			const auto f = detail::split_fields(s.substr(8), " ");
			long long declared = 0;
			if (!f.empty() && detail::parse_number(f[0], declared)) max_id = std::max<Index>(max_id, declared - 1);
			continue;
		}
		if (detail::skip_line(s)) continue;
		const auto f = detail::split_fields(s, "\t ");
		if (f.size() != 3) throw ParseError(source, lineno, "expected 3 fields, got " + std::to_string(f.size()));
		long long src = 0, dst = 0;
		double w = 0.0;
		if (!detail::parse_number(f[0], src) || !detail::parse_number(f[1], dst) || !detail::parse_number(f[2], w)) {
			throw ParseError(source, lineno, "malformed number");
		}
		if (src < 0 || dst < 0) throw ParseError(source, lineno, "negative node id");
		if (n >= 0 && (src >= n || dst >= n)) throw ParseError(source, lineno, "node id out of range");
		if (w == 0.0) throw ParseError(source, lineno, "zero weight");
		max_id = std::max<Index>(max_id, std::max(src, dst));
		edges.push_back({src, dst, w});
	}
	try {
		return build_signed_graph(edges, n >= 0 ? n : max_id + 1, directed);
	} catch (const InvalidInput& e) {
		throw ParseError(source, lineno, e.what());
	}
}

inline SignedGraph read_edge_list(const std::string& path, bool directed, Index n = -1) {
	auto in = detail::open_input(path);
	return read_edge_list(in, directed, n, path);
}

inline void write_edge_list(std::ostream& out, const SignedGraph& graph) {
	out << "# nodes " << graph.size() << (graph.directed() ? " directed" : " undirected") << '\n';
	out << std::setprecision(17);
	for (const Edge& e : graph.edges()) out << e.src << '\t' << e.dst << '\t' << e.weight << '\n';
}

/// Dense correlation matrix -> fully connected weighted graph; diagonal and exact zeros dropped.
inline SignedGraph read_correlation_csv(std::istream& in, const std::string& source = "<csv>") {
	std::vector<std::vector<double>> rows;
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		const auto s = detail::trim(line);
		if (detail::skip_line(s)) continue;
		std::vector<double> row;
		for (auto field : detail::split_fields(s, ",")) {
			double v = 0.0;
			if (!detail::parse_number(field, v)) throw ParseError(source, lineno, "malformed number");
			row.push_back(v);
		}
		if (!rows.empty() && row.size() != rows.front().size()) throw ParseError(source, lineno, "ragged row");
		rows.push_back(std::move(row));
	}
	const auto n = static_cast<Index>(rows.size());
	if (n > 0 && static_cast<Index>(rows.front().size()) != n) throw ParseError(source, lineno, "matrix is not square");
	std::vector<Triplet> triplets;
	for (Index i = 0; i < n; ++i) {
		for (Index j = 0; j < n; ++j) {
			if (i != j && rows[i][j] != 0.0) triplets.emplace_back(i, j, rows[i][j]);
		}
	}
	SparseMatrix a(n, n);
	a.setFromTriplets(triplets.begin(), triplets.end());
	const bool symmetric = (SparseMatrix(a.transpose()) - a).norm() == 0.0;
	return SignedGraph(std::move(a), !symmetric);
}

inline SignedGraph read_correlation_csv(const std::string& path) {
	auto in = detail::open_input(path);
	return read_correlation_csv(in, path);
}

/// Node labels; every node 0..n-1 must be listed exactly once.
inline Labels read_labels(std::istream& in, Index n, const std::string& source = "<labels>") {
	Labels labels(static_cast<std::size_t>(n), -1);
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		const auto s = detail::trim(line);
		if (detail::skip_line(s)) continue;
		const auto f = detail::split_fields(s, "\t ");
		long long node = 0;
		int cluster = 0;
		if (f.size() != 2 || !detail::parse_number(f[0], node) || !detail::parse_number(f[1], cluster)) {
			throw ParseError(source, lineno, "expected 'node<TAB>cluster'");
		}
		if (node < 0 || node >= n) throw ParseError(source, lineno, "node id " + std::to_string(node) + " out of range");
		if (cluster < 0) throw ParseError(source, lineno, "negative cluster id");
		if (labels[node] != -1) throw ParseError(source, lineno, "node listed twice");
		labels[node] = cluster;
	}
	for (Index i = 0; i < n; ++i) {
		if (labels[i] < 0) throw ParseError(source, lineno, "node " + std::to_string(i) + " has no label");
	}
	return labels;
}

inline Labels read_labels(const std::string& path, Index n) {
	auto in = detail::open_input(path);
	return read_labels(in, n, path);
}

inline void write_labels(std::ostream& out, const Labels& labels) {
	for (std::size_t i = 0; i < labels.size(); ++i) out << i << '\t' << labels[i] << '\n';
}

inline Matrix read_features(std::istream& in, Index n, const std::string& source = "<features>") {
	std::vector<std::vector<double>> rows;
	std::string line;
	std::size_t lineno = 0;
	while (std::getline(in, line)) {
		++lineno;
		const auto s = detail::trim(line);
		if (detail::skip_line(s)) continue;
		std::vector<double> row;
		for (auto field : detail::split_fields(s, ",\t ")) {
			double v = 0.0;
			if (!detail::parse_number(field, v)) throw ParseError(source, lineno, "malformed number");
			row.push_back(v);
		}
		if (!rows.empty() && row.size() != rows.front().size()) throw ParseError(source, lineno, "ragged row");
		rows.push_back(std::move(row));
	}
	if (static_cast<Index>(rows.size()) != n || rows.empty() || rows.front().empty()) {
		throw ParseError(source, lineno, "expected " + std::to_string(n) + " non-empty feature rows");
	}
	Matrix x(n, static_cast<Index>(rows.front().size()));
	for (Index i = 0; i < n; ++i) {
		for (Index j = 0; j < x.cols(); ++j) x(i, j) = rows[i][j];
	}
	return x;
}

inline Matrix read_features(const std::string& path, Index n) {
	auto in = detail::open_input(path);
	return read_features(in, n, path);
}

} // namespace sssnet
