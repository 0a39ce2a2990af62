#pragma once

// Versioned JSON checkpoints. Doubles are written in shortest round-trip
// form, so a save/load cycle reproduces every parameter bit for bit.
//
// {
//   "format_version": 1,
//   "K": .., "T": .., "B": .., "alpha": .., "hidden_widths": [..],
//   "eps": .., "momentum": .., "mode": "inference",
//   "scaler": null | {...},
//   "blocks": [ { "norm": {...}, "linear": {...}, "coupling": {...} } ]
// }

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "fcpflow/flow/model.hpp"

namespace fcpflow::train {

inline constexpr int kCheckpointVersion = 1;

namespace detail {

using nlohmann::json;

inline json array_to_json(const Array2 &a) {
	return json{{"shape", {a.rows(), a.cols()}}, {"data", std::vector<double>(a.values().begin(), a.values().end())}};
}

inline const json &field(const json &j, const std::string &name, const std::string &path) {
	if (!j.is_object() || !j.contains(name)) {
		throw SchemaError("checkpoint: missing field '" + path + name + "'");
	}
	return j.at(name);
}

template <typename T>
T get(const json &j, const std::string &name, const std::string &path) {
	const json &v = field(j, name, path);
	try {
		return v.get<T>();
	} catch (const json::exception &) {
		throw SchemaError("checkpoint: field '" + path + name + "' has the wrong type");
	}
}

inline Array2 array_from_json(const json &j, const std::string &name, const std::string &path) {
	const json &a = field(j, name, path);
	const std::string where = path + name + ".";
	const auto shape = get<std::vector<std::size_t>>(a, "shape", where);
	auto data = get<std::vector<double>>(a, "data", where);
	if (shape.size() != 2 || shape[0] * shape[1] != data.size()) {
		throw SchemaError("checkpoint: field '" + path + name + "' has inconsistent shape");
	}
	return Array2(shape[0], shape[1], std::move(data));
}

inline void expect_shape(const Array2 &a, std::size_t rows, std::size_t cols, const std::string &what) {
	if (a.rows() != rows || a.cols() != cols) {
		throw SchemaError("checkpoint: '" + what + "' has shape " + a.shape_string() + ", expected " +
		                  std::to_string(rows) + "x" + std::to_string(cols));
	}
}

inline json mlp_to_json(const Mlp &net) {
	json layers = json::array();
	for (std::size_t l = 0; l < net.weights.size(); ++l) {
		layers.push_back({{"w", array_to_json(net.weights[l])}, {"b", array_to_json(net.biases[l])}});
	}
	return json{{"layers", layers}};
}

inline void mlp_from_json(const json &j, Mlp &net, const std::string &path) {
	const json &layers = field(j, "layers", path);
	if (!layers.is_array() || layers.size() != net.weights.size()) {
		throw SchemaError("checkpoint: '" + path + "layers' has the wrong layer count");
	}
	for (std::size_t l = 0; l < net.weights.size(); ++l) {
		const std::string where = path + "layers[" + std::to_string(l) + "].";
		Array2 w = array_from_json(layers[l], "w", where);
		Array2 b = array_from_json(layers[l], "b", where);
		expect_shape(w, net.weights[l].rows(), net.weights[l].cols(), where + "w");
		expect_shape(b, net.biases[l].rows(), net.biases[l].cols(), where + "b");
		net.weights[l] = std::move(w);
		net.biases[l] = std::move(b);
	}
}

} // namespace detail

inline nlohmann::json scaler_to_json(const data::Scaler &s) {
	return {{"method", s.method},
	        {"profile_mean", s.profile_mean},
	        {"profile_std", s.profile_std},
	        {"condition_min", s.condition_min},
	        {"condition_max", s.condition_max}};
}

inline data::Scaler scaler_from_json(const nlohmann::json &j, const std::string &path = "scaler.") {
	using detail::get;
	data::Scaler s;
	s.method = get<std::string>(j, "method", path);
	s.profile_mean = get<std::vector<double>>(j, "profile_mean", path);
	s.profile_std = get<std::vector<double>>(j, "profile_std", path);
	s.condition_min = get<std::vector<double>>(j, "condition_min", path);
	s.condition_max = get<std::vector<double>>(j, "condition_max", path);
	return s;
}

inline nlohmann::json checkpoint_to_json(const FlowModel &model) {
	using detail::array_to_json;
	using nlohmann::json;
	const FlowConfig &cfg = model.config();
	json blocks = json::array();
	for (const FlowBlock &b : model.blocks()) {
		json block;
		block["norm"] = {{"gamma", b.norm.gamma},     {"beta", b.norm.beta},
		                 {"eps", b.norm.eps},         {"momentum", b.norm.momentum},
		                 {"populated", b.norm.populated}};
		block["linear"] = {{"perm", b.linear.perm},
		                   {"sign", b.linear.sign},
		                   {"lower", array_to_json(b.linear.lower)},
		                   {"upper", array_to_json(b.linear.upper)},
		                   {"log_diag", array_to_json(b.linear.log_diag)}};
		block["coupling"] = {{"s1", detail::mlp_to_json(b.coupling.s1)},
		                     {"t1", detail::mlp_to_json(b.coupling.t1)},
		                     {"s2", detail::mlp_to_json(b.coupling.s2)},
		                     {"t2", detail::mlp_to_json(b.coupling.t2)}};
		blocks.push_back(std::move(block));
	}
	json j;
	j["format_version"] = kCheckpointVersion;
	j["K"] = cfg.blocks;
	j["T"] = cfg.profile_length;
	j["B"] = cfg.condition_length;
	j["alpha"] = cfg.clamp.alpha;
	j["alpha_range_checked"] = cfg.clamp.validate_range;
	j["hidden_widths"] = std::vector<std::size_t>(cfg.hidden_layers, cfg.hidden_width);
	j["eps"] = cfg.eps;
	j["momentum"] = cfg.momentum;
	j["mode"] = model.mode() == Mode::inference ? "inference" : "training";
	j["scaler"] = model.scaler ? scaler_to_json(*model.scaler) : json(nullptr);
	j["blocks"] = std::move(blocks);
	return j;
}

inline FlowModel checkpoint_from_json(const nlohmann::json &j) {
	using detail::get;
	const int version = get<int>(j, "format_version", "");
	if (version != kCheckpointVersion) {
		throw LoadError("checkpoint: format_version " + std::to_string(version) + " is not supported (expected " +
		                std::to_string(kCheckpointVersion) + ")");
	}
	FlowConfig cfg;
	cfg.blocks = get<std::size_t>(j, "K", "");
	cfg.profile_length = get<std::size_t>(j, "T", "");
	cfg.condition_length = get<std::size_t>(j, "B", "");
	cfg.clamp.alpha = get<double>(j, "alpha", "");
	if (j.contains("alpha_range_checked")) {
		cfg.clamp.validate_range = get<bool>(j, "alpha_range_checked", "");
	}
	const auto widths = get<std::vector<std::size_t>>(j, "hidden_widths", "");
	if (widths.empty() || std::any_of(widths.begin(), widths.end(), [&](std::size_t w) { return w != widths[0]; })) {
		throw SchemaError("checkpoint: 'hidden_widths' must list one common width per hidden layer");
	}
	cfg.hidden_width = widths.front();
	cfg.hidden_layers = widths.size();
	cfg.eps = get<double>(j, "eps", "");
	cfg.momentum = get<double>(j, "momentum", "");
	try {
		cfg.check();
	} catch (const ConfigError &e) {
		throw SchemaError(std::string("checkpoint: invalid configuration: ") + e.what());
	}

	FlowModel model(cfg, 0);
	const auto &blocks = detail::field(j, "blocks", "");
	if (!blocks.is_array() || blocks.size() != cfg.blocks) {
		throw SchemaError("checkpoint: 'blocks' must hold K = " + std::to_string(cfg.blocks) + " entries");
	}
	const std::size_t t = cfg.profile_length;
	for (std::size_t k = 0; k < cfg.blocks; ++k) {
		const std::string path = "blocks[" + std::to_string(k) + "].";
		FlowBlock &b = model.blocks()[k];
		const auto &norm = detail::field(blocks[k], "norm", path);
		b.norm.gamma = get<std::vector<double>>(norm, "gamma", path + "norm.");
		b.norm.beta = get<std::vector<double>>(norm, "beta", path + "norm.");
		b.norm.eps = get<double>(norm, "eps", path + "norm.");
		b.norm.momentum = get<double>(norm, "momentum", path + "norm.");
		b.norm.populated = get<bool>(norm, "populated", path + "norm.");
		if (b.norm.gamma.size() != t || b.norm.beta.size() != t) {
			throw SchemaError("checkpoint: '" + path + "norm' statistics must have T entries");
		}

		const auto &lin = detail::field(blocks[k], "linear", path);
		const std::string lp = path + "linear.";
		b.linear.perm = get<std::vector<std::size_t>>(lin, "perm", lp);
		b.linear.sign = get<std::vector<double>>(lin, "sign", lp);
		b.linear.lower = detail::array_from_json(lin, "lower", lp);
		b.linear.upper = detail::array_from_json(lin, "upper", lp);
		b.linear.log_diag = detail::array_from_json(lin, "log_diag", lp);
		std::vector<std::size_t> sorted = b.linear.perm;
		std::sort(sorted.begin(), sorted.end());
		for (std::size_t i = 0; i < sorted.size(); ++i) {
			if (sorted[i] != i) {
				throw SchemaError("checkpoint: '" + lp + "perm' is not a permutation");
			}
		}
		if (sorted.size() != t || b.linear.sign.size() != t) {
			throw SchemaError("checkpoint: '" + lp + "perm/sign' must have T entries");
		}
		detail::expect_shape(b.linear.lower, t, t, lp + "lower");
		detail::expect_shape(b.linear.upper, t, t, lp + "upper");
		detail::expect_shape(b.linear.log_diag, 1, t, lp + "log_diag");

		const auto &cpl = detail::field(blocks[k], "coupling", path);
		const std::string cp = path + "coupling.";
		detail::mlp_from_json(detail::field(cpl, "s1", cp), b.coupling.s1, cp + "s1.");
		detail::mlp_from_json(detail::field(cpl, "t1", cp), b.coupling.t1, cp + "t1.");
		detail::mlp_from_json(detail::field(cpl, "s2", cp), b.coupling.s2, cp + "s2.");
		detail::mlp_from_json(detail::field(cpl, "t2", cp), b.coupling.t2, cp + "t2.");
	}
	const auto &scaler = detail::field(j, "scaler", "");
	if (!scaler.is_null()) {
		model.scaler = scaler_from_json(scaler);
	}
	const auto mode = get<std::string>(j, "mode", "");
	if (mode != "inference" && mode != "training") {
		throw SchemaError("checkpoint: 'mode' must be inference or training");
	}
	model.set_mode(mode == "inference" ? Mode::inference : Mode::training);
	return model;
}

/// Writes to a temporary file and renames it into place, so a failed save
/// never leaves a partial checkpoint behind.
inline void write_text_atomically(const std::string &path, const std::string &text) {
	const std::string tmp = path + ".tmp";
	{
		std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
		if (!out) {
			throw LoadError("cannot write '" + tmp + "'");
		}
		out << text;
		out.flush();
		if (!out) {
			std::filesystem::remove(tmp);
			throw LoadError("failed writing '" + tmp + "'");
		}
	}
	std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const FlowModel &model, const std::string &path) {
	write_text_atomically(path, checkpoint_to_json(model).dump(1) + "\n");
}

inline FlowModel load_checkpoint(const std::string &path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw LoadError("cannot open checkpoint '" + path + "'");
	}
	std::stringstream buffer;
	buffer << in.rdbuf();
	nlohmann::json j;
	try {
		j = nlohmann::json::parse(buffer.str());
	} catch (const nlohmann::json::parse_error &e) {
		throw LoadError("checkpoint '" + path + "' is not valid JSON (truncated?): " + e.what());
	}
	return checkpoint_from_json(j);
}

} // namespace fcpflow::train
