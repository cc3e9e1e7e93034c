#pragma once

#include "sssnet/io.hpp"
#include "sssnet/simpa.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <string>

namespace sssnet {

inline constexpr const char* kCheckpointFormat = "sssnet-ckpt-v1";

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
	nlohmann::json j;
	j["rows"] = m.rows();
	j["cols"] = m.cols();
	auto& data = j["data"] = nlohmann::json::array();
	for (Index i = 0; i < m.rows(); ++i) {
		for (Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
	}
	return j;
}

inline Matrix matrix_from_json(const nlohmann::json& j, Index rows, Index cols, const std::string& what) {
	if (j.at("rows").get<Index>() != rows || j.at("cols").get<Index>() != cols) {
		throw InvalidInput("checkpoint: shape mismatch for " + what);
	}
	const auto& data = j.at("data");
	if (static_cast<Index>(data.size()) != rows * cols) throw InvalidInput("checkpoint: wrong element count for " + what);
	Matrix m(rows, cols);
	for (Index i = 0; i < rows; ++i) {
		for (Index k = 0; k < cols; ++k) m(i, k) = data[static_cast<std::size_t>(i * cols + k)].get<double>();
	}
	return m;
}

inline nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from_json(const nlohmann::json& j, Index size, const std::string& what) {
	const auto values = j.get<std::vector<double>>();
	if (static_cast<Index>(values.size()) != size) throw InvalidInput("checkpoint: wrong length for " + what);
	return Eigen::Map<const Vector>(values.data(), size);
}

} // namespace detail

inline nlohmann::json checkpoint_json(const SimpaModel& model) {
	const auto& s = model.shape;
	const auto& p = model.params;
	nlohmann::json j;
	j["format"] = kCheckpointFormat;
	j["dims"] = {{"d_in", s.d_in}, {"hidden", s.hidden}, {"K", s.K}, {"hop", s.hop}, {"directed", s.directed},
	             {"balance_variant", s.balance_variant}};
	auto& mlp = j["mlp"] = nlohmann::json::array();
	for (const auto& m : p.mlp) mlp.push_back({{"w1", detail::matrix_to_json(m.w1)}, {"w2", detail::matrix_to_json(m.w2)}});
	auto& omega = j["omega"] = nlohmann::json::array();
	for (const auto& w : p.omega) omega.push_back(detail::vector_to_json(w));
	j["balance"] = detail::vector_to_json(p.balance);
	j["head"] = {{"w", detail::matrix_to_json(p.head_w)}, {"b", detail::vector_to_json(p.head_b)}};
	return j;
}

inline SimpaModel model_from_checkpoint(const nlohmann::json& j) {
	try {
		if (j.at("format").get<std::string>() != kCheckpointFormat) {
			throw InvalidInput("checkpoint: unsupported format '" + j.at("format").get<std::string>() + "'");
		}
		const auto& d = j.at("dims");
		ModelShape s;
		s.d_in = d.at("d_in").get<Index>();
		s.hidden = d.at("hidden").get<Index>();
		s.K = d.at("K").get<int>();
		s.hop = d.at("hop").get<int>();
		s.directed = d.at("directed").get<bool>();
		s.balance_variant = d.value("balance_variant", false);
		if (s.d_in < 1 || s.hidden < 1 || s.K < 1 || s.hop < 0) throw InvalidInput("checkpoint: invalid dims");
		SimpaModel m{s, ParameterSet::zeros(s)};
		auto& p = m.params;
		const auto& mlp = j.at("mlp");
		const auto& omega = j.at("omega");
		if (mlp.size() != p.mlp.size() || omega.size() != p.omega.size()) {
			throw InvalidInput("checkpoint: channel count does not match dims");
		}
		for (std::size_t c = 0; c < p.mlp.size(); ++c) {
			p.mlp[c].w1 = detail::matrix_from_json(mlp[c].at("w1"), s.d_in, s.hidden, "w1");
			p.mlp[c].w2 = detail::matrix_from_json(mlp[c].at("w2"), s.hidden, s.hidden, "w2");
			p.omega[c] = detail::vector_from_json(omega[c], p.omega[c].size(), "omega");
		}
		p.balance = detail::vector_from_json(j.at("balance"), p.balance.size(), "balance");
		p.head_w = detail::matrix_from_json(j.at("head").at("w"), s.embedding_dim(), s.K, "head.w");
		p.head_b = detail::vector_from_json(j.at("head").at("b"), s.K, "head.b");
		return m;
	} catch (const nlohmann::json::exception& e) {
		throw InvalidInput(std::string("checkpoint: ") + e.what());
	}
}

inline void save_checkpoint(const SimpaModel& model, const std::filesystem::path& path) {
	std::ofstream out(path);
	if (!out) throw InvalidInput("cannot write checkpoint " + path.string());
	out << checkpoint_json(model).dump() << '\n';
	if (!out) throw InvalidInput("failed writing checkpoint " + path.string());
}

inline SimpaModel load_checkpoint(const std::filesystem::path& path) {
	std::ifstream in(path);
	if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(in);
	} catch (const nlohmann::json::parse_error& e) {
		throw ParseError(path.string(), 0, e.what());
	}
	return model_from_checkpoint(j);
}

} // namespace sssnet
