// fcpflow: train | generate | predict | evaluate
//
// Settings come from built-in defaults, then an optional JSON file given with
// --config, then command-line flags, each overriding the one before. The
// settings actually used are written to <out>/effective_config.json.
//
// Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or I/O error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fcpflow/fcpflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fcpflow;

namespace {

/// Bad invocation: missing or contradictory settings, unreadable paths.
class UsageError : public std::runtime_error {
public:
	using std::runtime_error::runtime_error;
};

json default_settings() {
	return {
	    {"data", ""},
	    {"checkpoint", ""},
	    {"out", "."},
	    {"seed", 0},
	    {"samples", 100},
	    {"quantiles", {0.05, 0.5, 0.95}},
	    {"epochs", 100},
	    {"batch_size", 128},
	    {"lr", 1e-3},
	    {"clip_norm", 10.0},
	    {"blocks", 4},
	    {"hidden", 64},
	    {"hidden_layers", 2},
	    {"alpha", 0.6},
	    {"unconditional", false},
	    {"conditions", ""},
	    {"derive", json::array()},
	    {"day_pairs", false},
	    {"test_fraction", 0.0},
	    {"mode", ""},
	    {"generated", ""},
	    {"ensemble", ""},
	    {"write_ensemble", false},
	};
}

/// Command-line values; only those actually given are applied.
struct Flags {
	std::string data, checkpoint, out, config, conditions, mode, generated, ensemble, quantiles, derive;
	std::uint64_t seed = 0;
	std::size_t samples = 0, epochs = 0, batch_size = 0, blocks = 0, hidden = 0, hidden_layers = 0;
	double lr = 0.0, alpha = 0.0, clip_norm = 0.0, test_fraction = 0.0;
	bool unconditional = false, day_pairs = false, write_ensemble = false;
	std::map<std::string, CLI::Option *> given;
};

void add_flags(CLI::App &cmd, Flags &f) {
	auto add = [&](const std::string &key, const std::string &name, auto &target, const std::string &help) {
		f.given[key] = cmd.add_option(name, target, help);
	};
	add("data", "--data", f.data, "input CSV (profiles, pairs, or real profiles for evaluate)");
	add("checkpoint", "--checkpoint", f.checkpoint, "checkpoint path (default <out>/checkpoint.json when training)");
	add("out", "--out", f.out, "output directory");
	add("seed", "--seed", f.seed, "random seed");
	add("samples", "--samples", f.samples, "samples per condition row (generate, predict)");
	add("quantiles", "--quantiles", f.quantiles, "comma-separated quantile levels in (0,1)");
	add("epochs", "--epochs", f.epochs, "training epochs");
	add("batch_size", "--batch-size", f.batch_size, "mini-batch size (>= 2)");
	add("lr", "--lr", f.lr, "learning rate");
	add("clip_norm", "--clip-norm", f.clip_norm, "global gradient-norm clip");
	add("blocks", "--blocks", f.blocks, "number of flow blocks K");
	add("hidden", "--hidden", f.hidden, "hidden width of the coupling networks");
	add("hidden_layers", "--hidden-layers", f.hidden_layers, "hidden layers of the coupling networks");
	add("alpha", "--alpha", f.alpha, "soft-clamp bound");
	add("conditions", "--conditions", f.conditions, "condition CSV, or literal values 'a,b;c,d' (generate)");
	add("derive", "--derive", f.derive, "conditions to build before training: daily,annual,<c_column>,...");
	add("test_fraction", "--test-fraction", f.test_fraction, "hold out this fraction as test.csv (train)");
	add("mode", "--mode", f.mode, "evaluate mode: generation | forecast");
	add("generated", "--generated", f.generated, "generated profiles CSV (evaluate)");
	add("ensemble", "--ensemble", f.ensemble, "forecast ensemble CSV (evaluate)");
	f.given["unconditional"] = cmd.add_flag("--unconditional", f.unconditional, "ignore conditions (B = 0)");
	f.given["day_pairs"] = cmd.add_flag("--day-pairs", f.day_pairs, "condition each day on the previous day");
	f.given["write_ensemble"] = cmd.add_flag("--write-ensemble", f.write_ensemble, "also write ensemble.csv");
	cmd.add_option("--config", f.config, "JSON settings file");
}

std::vector<std::string> split_list(const std::string &s, char sep) {
	std::vector<std::string> out;
	std::string item;
	std::istringstream in(s);
	while (std::getline(in, item, sep)) {
		item = data::detail::trim(item);
		if (!item.empty()) {
			out.push_back(item);
		}
	}
	return out;
}

double parse_number(const std::string &s, const std::string &what) {
	double v = 0.0;
	if (!data::detail::parse_double(s, v)) {
		throw UsageError("invalid number '" + s + "' in " + what);
	}
	return v;
}

json effective_settings(const Flags &f) {
	json s = default_settings();
	if (!f.config.empty()) {
		std::ifstream in(f.config);
		if (!in) {
			throw UsageError("cannot open config file '" + f.config + "'");
		}
		json file;
		try {
			in >> file;
		} catch (const json::exception &e) {
			throw UsageError("config file '" + f.config + "' is not valid JSON: " + e.what());
		}
		if (!file.is_object()) {
			throw UsageError("config file '" + f.config + "' must hold a JSON object");
		}
		for (const auto &[key, value] : file.items()) {
			if (!s.contains(key)) {
				throw UsageError("config file '" + f.config + "': unknown setting '" + key + "'");
			}
			if (s[key].is_number() && !value.is_number()) {
				throw UsageError("config file '" + f.config + "': setting '" + key + "' must be a number");
			}
			s[key] = value;
		}
	}
	auto given = [&](const std::string &key) { return f.given.at(key)->count() > 0; };
	if (given("data")) s["data"] = f.data;
	if (given("checkpoint")) s["checkpoint"] = f.checkpoint;
	if (given("out")) s["out"] = f.out;
	if (given("seed")) s["seed"] = f.seed;
	if (given("samples")) s["samples"] = f.samples;
	if (given("epochs")) s["epochs"] = f.epochs;
	if (given("batch_size")) s["batch_size"] = f.batch_size;
	if (given("lr")) s["lr"] = f.lr;
	if (given("clip_norm")) s["clip_norm"] = f.clip_norm;
	if (given("blocks")) s["blocks"] = f.blocks;
	if (given("hidden")) s["hidden"] = f.hidden;
	if (given("hidden_layers")) s["hidden_layers"] = f.hidden_layers;
	if (given("alpha")) s["alpha"] = f.alpha;
	if (given("conditions")) s["conditions"] = f.conditions;
	if (given("test_fraction")) s["test_fraction"] = f.test_fraction;
	if (given("mode")) s["mode"] = f.mode;
	if (given("generated")) s["generated"] = f.generated;
	if (given("ensemble")) s["ensemble"] = f.ensemble;
	if (given("unconditional")) s["unconditional"] = f.unconditional;
	if (given("day_pairs")) s["day_pairs"] = f.day_pairs;
	if (given("write_ensemble")) s["write_ensemble"] = f.write_ensemble;
	if (given("quantiles")) {
		json q = json::array();
		for (const auto &item : split_list(f.quantiles, ',')) {
			q.push_back(parse_number(item, "--quantiles"));
		}
		s["quantiles"] = q;
	}
	if (given("derive")) {
		s["derive"] = split_list(f.derive, ',');
	}
	return s;
}

std::vector<double> quantile_levels(const json &s) {
	std::vector<double> taus;
	for (const auto &v : s.at("quantiles")) {
		if (!v.is_number()) {
			throw UsageError("quantiles must be numbers");
		}
		const double tau = v.get<double>();
		if (!(tau > 0.0 && tau < 1.0)) {
			throw UsageError("quantile level " + v.dump() + " outside (0, 1)");
		}
		taus.push_back(tau);
	}
	if (taus.empty()) {
		throw UsageError("no quantile levels given");
	}
	return taus;
}

std::string require_file(const json &s, const std::string &key, const std::string &flag) {
	const std::string path = s.at(key).get<std::string>();
	if (path.empty()) {
		throw UsageError("missing " + flag);
	}
	if (!fs::is_regular_file(path)) {
		throw UsageError(flag + ": no such file '" + path + "'");
	}
	return path;
}

fs::path prepare_out_dir(const json &s) {
	const fs::path out = s.at("out").get<std::string>();
	std::error_code ec;
	fs::create_directories(out, ec);
	if (ec || !fs::is_directory(out)) {
		throw UsageError("cannot create output directory '" + out.string() + "'");
	}
	return out;
}

void write_text(const fs::path &path, const std::string &text) {
	train::write_text_atomically(path.string(), text);
}

void echo_settings(const fs::path &out, const std::string &command, const json &s) {
	json e = s;
	e["command"] = command;
	write_text(out / "effective_config.json", e.dump(2) + "\n");
}

const data::Scaler &model_scaler(const FlowModel &model) {
	if (!model.scaler) {
		throw LoadError("checkpoint has no scaler metadata");
	}
	return *model.scaler;
}

std::string csv_line(const std::vector<std::string> &fields) {
	std::string line;
	for (std::size_t i = 0; i < fields.size(); ++i) {
		line += (i ? "," : "") + fields[i];
	}
	return line + "\n";
}

// train

int cmd_train(const json &s) {
	const std::string data_path = require_file(s, "data", "--data");
	const fs::path out = prepare_out_dir(s);
	const std::string checkpoint =
	    s.at("checkpoint").get<std::string>().empty() ? (out / "checkpoint.json").string() : s.at("checkpoint").get<std::string>();

	train::TrainConfig cfg;
	cfg.epochs = s.at("epochs").get<std::size_t>();
	cfg.batch_size = s.at("batch_size").get<std::size_t>();
	cfg.learning_rate = s.at("lr").get<double>();
	cfg.clip_norm = s.at("clip_norm").get<double>();
	cfg.seed = s.at("seed").get<std::uint64_t>();
	cfg.alpha = s.at("alpha").get<double>();
	cfg.blocks = s.at("blocks").get<std::size_t>();
	cfg.hidden_width = s.at("hidden").get<std::size_t>();
	cfg.hidden_layers = s.at("hidden_layers").get<std::size_t>();
	cfg.check();

	data::ProfileDataset ds = data::load_csv(data_path);
	for (const auto &w : ds.warnings) {
		std::cerr << "warning: " << w << "\n";
	}
	if (s.at("day_pairs").get<bool>()) {
		const data::WindowResult w = data::window_day_pairs(ds);
		std::cerr << "day pairs: " << w.pairs.size() << " (skipped " << w.gaps << " gaps)\n";
		ds = w.pairs;
	}
	if (!s.at("derive").empty()) {
		std::vector<data::ConditionSource> sources;
		for (const auto &item : s.at("derive")) {
			const std::string name = item.get<std::string>();
			if (name == "daily") {
				sources.push_back(data::ConditionSource::daily_total());
			} else if (name == "annual") {
				sources.push_back(data::ConditionSource::annual_total());
			} else {
				sources.push_back(data::ConditionSource::from_column(name));
			}
		}
		ds = data::derive_conditions(ds, sources);
	}
	if (s.at("unconditional").get<bool>()) {
		ds.conditions = Array2(ds.size(), 0);
		ds.condition_labels.clear();
	}

	const double test_fraction = s.at("test_fraction").get<double>();
	data::ProfileDataset train_part = ds;
	if (test_fraction > 0.0) {
		auto [a, b] = data::split(ds, 1.0 - test_fraction, cfg.seed);
		data::write_csv((out / "train.csv").string(), a);
		data::write_csv((out / "test.csv").string(), b);
		train_part = std::move(a);
	}

	const data::Scaler scaler = data::fit_scaler(train_part);
	const data::ProfileDataset scaled = data::apply_scaler(train_part, scaler);
	train::FitResult result = train::fit(scaled, cfg);
	result.model.scaler = scaler;

	std::ostringstream log;
	result.log.write_csv(log);
	write_text(out / "train_log.csv", log.str());

	json manifest;
	manifest["resolution_minutes"] = train_part.resolution_minutes;
	manifest["N"] = train_part.size();
	manifest["T"] = train_part.profile_length();
	manifest["B"] = train_part.condition_length();
	manifest["profile_labels"] = train_part.profile_labels;
	manifest["condition_labels"] = train_part.condition_labels;
	manifest["scaler"] = train::scaler_to_json(scaler);
	write_text(out / "scaler.json", manifest.dump(2) + "\n");
	echo_settings(out, "train", s);
	train::save_checkpoint(result.model, checkpoint);

	const auto &epochs = result.log.epochs;
	std::cout << "trained on " << train_part.size() << " rows (T=" << train_part.profile_length()
	          << ", B=" << train_part.condition_length() << ")";
	if (!epochs.empty()) {
		std::cout << "; mean NLL " << epochs.front().mean_nll << " -> " << epochs.back().mean_nll;
	}
	std::cout << "\ncheckpoint: " << checkpoint << "\n";
	return 0;
}

// generate

/// Conditions in physical units from a CSV file or a literal 'a,b;c,d'.
Array2 read_conditions(const std::string &spec, std::size_t b) {
	if (fs::is_regular_file(spec)) {
		const data::CsvTable table = data::read_table(spec);
		Array2 c = data::condition_columns(table);
		if (c.cols() != b) {
			throw ContractError("conditions file '" + spec + "' has " + std::to_string(c.cols()) +
			                    " condition columns, checkpoint expects B = " + std::to_string(b));
		}
		return c;
	}
	std::vector<double> values;
	std::size_t rows = 0;
	for (const auto &row : split_list(spec, ';')) {
		const auto items = split_list(row, ',');
		if (items.size() != b) {
			throw ContractError("literal condition row '" + row + "' has " + std::to_string(items.size()) +
			                    " values, checkpoint expects B = " + std::to_string(b));
		}
		for (const auto &item : items) {
			double v = 0.0;
			if (!data::detail::parse_double(item, v)) {
				throw UsageError("--conditions: '" + spec + "' is neither a file nor a list of numbers");
			}
			values.push_back(v);
		}
		++rows;
	}
	if (rows == 0) {
		throw UsageError("--conditions: no condition rows in '" + spec + "'");
	}
	return Array2(rows, b, std::move(values));
}

int cmd_generate(const json &s) {
	const std::string checkpoint = require_file(s, "checkpoint", "--checkpoint");
	const fs::path out = prepare_out_dir(s);
	const std::size_t samples = s.at("samples").get<std::size_t>();
	if (samples == 0) {
		throw UsageError("--samples must be positive");
	}
	const std::uint64_t seed = s.at("seed").get<std::uint64_t>();
	const std::string cond_spec = s.at("conditions").get<std::string>();

	const FlowModel model = train::load_checkpoint(checkpoint);
	const data::Scaler &scaler = model_scaler(model);
	const std::size_t b = model.condition_length();
	const bool unconditional = s.at("unconditional").get<bool>() || cond_spec.empty();
	if (unconditional && b > 0) {
		throw UsageError("checkpoint expects B = " + std::to_string(b) + " conditions; supply --conditions");
	}
	if (!unconditional && b == 0) {
		throw UsageError("checkpoint is unconditional (B = 0) but --conditions was given");
	}

	const Array2 raw = unconditional ? Array2(1, 0) : read_conditions(cond_spec, b);
	const Array2 scaled = scaler.transform_conditions(raw);
	const std::size_t rows = raw.rows();

	data::ProfileDataset gen;
	gen.profiles = Array2(rows * samples, model.profile_length());
	gen.conditions = Array2(rows * samples, b);
	gen.profile_labels = data::default_profile_labels(model.profile_length());
	gen.resolution_minutes = data::resolution_for_length(model.profile_length());
	for (std::size_t j = 0; j < b; ++j) {
		gen.condition_labels.push_back("c_" + std::to_string(j));
	}
	data::CsvColumn source{"source_row", {}};
	data::CsvColumn sample{"sample", {}};
	for (std::size_t r = 0; r < rows; ++r) {
		const Array2 x = scaler.inverse_profiles(
		    model.sample(slice_rows(scaled, r, 1), samples, stream_seed(seed, r)));
		if (!x.all_finite()) {
			throw NumericError("generated profiles for condition row " + std::to_string(r) + " are not finite");
		}
		for (std::size_t k = 0; k < samples; ++k) {
			const std::size_t row = r * samples + k;
			std::copy(x.row(k).begin(), x.row(k).end(), gen.profiles.row(row).begin());
			for (std::size_t j = 0; j < b; ++j) {
				gen.conditions(row, j) = raw(r, j);
			}
			source.values.push_back(std::to_string(r));
			sample.values.push_back(std::to_string(k));
		}
	}
	if (b > 0 && fs::is_regular_file(cond_spec)) {
		std::vector<std::string> labels;
		data::condition_columns(data::read_table(cond_spec), &labels);
		gen.condition_labels = labels;
	}
	std::ostringstream text;
	data::write_csv(text, gen, {source, sample});
	write_text(out / "generated.csv", text.str());
	echo_settings(out, "generate", s);
	std::cout << "generated " << gen.size() << " profiles -> " << (out / "generated.csv").string() << "\n";
	return 0;
}

// predict

/// Forecast cases: profile = observed day, conditions = previous day.
data::ProfileDataset forecast_pairs(const std::string &path, std::size_t t) {
	data::ProfileDataset ds = data::load_csv(path);
	if (ds.profile_length() != t) {
		throw ContractError("'" + path + "' has T = " + std::to_string(ds.profile_length()) +
		                    ", checkpoint expects " + std::to_string(t));
	}
	if (ds.condition_length() == t) {
		return ds;
	}
	if (ds.condition_length() == 0 && ds.has_calendar()) {
		return data::window_day_pairs(ds).pairs;
	}
	throw ContractError("'" + path + "' has neither " + std::to_string(t) +
	                    " previous-day condition columns nor household_id/date columns to pair days");
}

int cmd_predict(const json &s) {
	const std::string checkpoint = require_file(s, "checkpoint", "--checkpoint");
	const std::string data_path = require_file(s, "data", "--data");
	const fs::path out = prepare_out_dir(s);
	const std::vector<double> taus = quantile_levels(s);
	const std::size_t samples = s.at("samples").get<std::size_t>();
	if (samples == 0) {
		throw UsageError("--samples must be positive");
	}
	const std::uint64_t seed = s.at("seed").get<std::uint64_t>();

	const FlowModel model = train::load_checkpoint(checkpoint);
	const data::Scaler &scaler = model_scaler(model);
	const std::size_t t = model.profile_length();
	if (model.condition_length() != t) {
		throw ContractError("predict needs a checkpoint conditioned on the previous day (B = T = " +
		                    std::to_string(t) + "), this one has B = " + std::to_string(model.condition_length()));
	}
	const data::ProfileDataset pairs = forecast_pairs(data_path, t);
	const Array2 scaled = scaler.transform_conditions(pairs.conditions);

	std::ostringstream quantiles;
	quantiles << "pair_id,t,tau,value\n";
	std::ostringstream ensemble;
	const bool write_ensemble = s.at("write_ensemble").get<bool>();
	if (write_ensemble) {
		std::vector<std::string> header{"pair_id", "member"};
		for (const auto &l : data::default_profile_labels(t)) {
			header.push_back(l);
		}
		ensemble << csv_line(header);
	}
	for (std::size_t p = 0; p < pairs.size(); ++p) {
		const Array2 x =
		    scaler.inverse_profiles(model.sample(slice_rows(scaled, p, 1), samples, stream_seed(seed, p)));
		if (!x.all_finite()) {
			throw NumericError("forecast ensemble for pair " + std::to_string(p) + " is not finite");
		}
		const auto q = metrics::ensemble_quantiles(x, taus);
		for (std::size_t step = 0; step < t; ++step) {
			for (double tau : taus) {
				quantiles << p << ',' << step << ',' << data::format_double(tau) << ','
				          << data::format_double(q.at(tau)[step]) << '\n';
			}
		}
		if (write_ensemble) {
			for (std::size_t k = 0; k < x.rows(); ++k) {
				std::vector<std::string> fields{std::to_string(p), std::to_string(k)};
				for (double v : x.row(k)) {
					fields.push_back(data::format_double(v));
				}
				ensemble << csv_line(fields);
			}
		}
	}
	data::CsvColumn pair_id{"pair_id", {}};
	for (std::size_t p = 0; p < pairs.size(); ++p) {
		pair_id.values.push_back(std::to_string(p));
	}
	std::ostringstream observed;
	data::write_csv(observed, pairs, {pair_id});
	write_text(out / "pairs.csv", observed.str());
	write_text(out / "quantiles.csv", quantiles.str());
	if (write_ensemble) {
		write_text(out / "ensemble.csv", ensemble.str());
	}
	echo_settings(out, "predict", s);
	std::cout << "forecast " << pairs.size() << " pairs x " << samples << " samples -> "
	          << (out / "quantiles.csv").string() << "\n";
	return 0;
}

// evaluate

/// Row -> pair id from a pair_id column, or the row index when absent.
std::vector<std::size_t> pair_ids(const std::string &path, std::size_t rows) {
	const data::CsvTable table = data::read_table(path);
	const auto col = table.column("pair_id");
	std::vector<std::size_t> ids(rows);
	for (std::size_t r = 0; r < rows; ++r) {
		if (!col) {
			ids[r] = r;
			continue;
		}
		const double v = parse_number(table.rows.at(r)[*col], path + " pair_id");
		if (v < 0.0 || v != std::floor(v)) {
			throw ParseError(path + ": bad pair_id '" + table.rows[r][*col] + "'");
		}
		ids[r] = static_cast<std::size_t>(v);
	}
	return ids;
}

int cmd_evaluate(const json &s) {
	const std::string data_path = require_file(s, "data", "--data");
	const fs::path out = prepare_out_dir(s);
	std::string mode = s.at("mode").get<std::string>();
	if (mode.empty()) {
		mode = s.at("ensemble").get<std::string>().empty() ? "generation" : "forecast";
	}

	metrics::MetricReport report;
	if (mode == "generation") {
		const std::string gen_path = require_file(s, "generated", "--generated");
		const data::ProfileDataset real = data::load_csv(data_path);
		const data::ProfileDataset gen = data::load_csv(gen_path, {.allow_negative = true});
		if (real.profile_length() != gen.profile_length()) {
			throw ContractError("real data has T = " + std::to_string(real.profile_length()) +
			                    ", generated data has T = " + std::to_string(gen.profile_length()));
		}
		report = metrics::generation_report(real.profiles, gen.profiles);
	} else if (mode == "forecast") {
		const std::string ens_path = require_file(s, "ensemble", "--ensemble");
		const std::vector<double> taus = quantile_levels(s);
		const data::ProfileDataset truth = data::load_csv(data_path);
		const data::ProfileDataset ens = data::load_csv(ens_path, {.allow_negative = true});
		if (truth.profile_length() != ens.profile_length()) {
			throw ContractError("observations have T = " + std::to_string(truth.profile_length()) +
			                    ", ensemble has T = " + std::to_string(ens.profile_length()));
		}
		const std::vector<std::size_t> truth_ids = pair_ids(data_path, truth.size());
		const std::vector<std::size_t> ens_ids = pair_ids(ens_path, ens.size());
		std::map<std::size_t, std::vector<std::size_t>> members;
		for (std::size_t r = 0; r < ens_ids.size(); ++r) {
			members[ens_ids[r]].push_back(r);
		}
		std::vector<Array2> ensembles;
		for (std::size_t id : truth_ids) {
			const auto it = members.find(id);
			if (it == members.end()) {
				throw ContractError("ensemble has no members for pair " + std::to_string(id));
			}
			ensembles.push_back(gather_rows(ens.profiles, it->second));
		}
		report = metrics::forecast_report(truth.profiles, ensembles, taus);
	} else {
		throw UsageError("--mode must be 'generation' or 'forecast', got '" + mode + "'");
	}

	std::ostringstream csv;
	report.write_csv(csv);
	write_text(out / "metrics.csv", csv.str());
	json j = report.to_json();
	j["mode"] = mode;
	write_text(out / "metrics.json", j.dump(2) + "\n");
	echo_settings(out, "evaluate", s);
	for (const auto &[name, value] : report.values) {
		std::cout << name << " " << data::format_double(value) << "\n";
	}
	return 0;
}

} // namespace

int main(int argc, char **argv) {
	CLI::App app{"FCPFlow: conditional normalizing flow for daily load profiles"};
	app.require_subcommand(1);
	Flags flags;
	CLI::App *train_cmd = app.add_subcommand("train", "fit a model and write checkpoint, scaler manifest and log");
	CLI::App *generate_cmd = app.add_subcommand("generate", "sample profiles for given conditions");
	CLI::App *predict_cmd = app.add_subcommand("predict", "probabilistic next-day forecasts");
	CLI::App *evaluate_cmd = app.add_subcommand("evaluate", "generation or forecast metrics");
	// Each subcommand gets its own flag storage; only one runs per call.
	std::map<CLI::App *, Flags> per_command;
	for (CLI::App *cmd : {train_cmd, generate_cmd, predict_cmd, evaluate_cmd}) {
		add_flags(*cmd, per_command[cmd]);
	}

	try {
		app.parse(argc, argv);
	} catch (const CLI::CallForHelp &e) {
		return app.exit(e);
	} catch (const CLI::ParseError &e) {
		app.exit(e);
		return 2;
	}

	try {
		for (auto &[cmd, f] : per_command) {
			if (!cmd->parsed()) {
				continue;
			}
			const json settings = effective_settings(f);
			if (cmd == train_cmd) {
				return cmd_train(settings);
			}
			if (cmd == generate_cmd) {
				return cmd_generate(settings);
			}
			if (cmd == predict_cmd) {
				return cmd_predict(settings);
			}
			return cmd_evaluate(settings);
		}
	} catch (const UsageError &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const ParseError &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const LoadError &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const ConfigError &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const fs::filesystem_error &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 2;
	} catch (const json::exception &e) {
		std::cerr << "error: bad setting value: " << e.what() << "\n";
		return 2;
	} catch (const std::exception &e) {
		std::cerr << "error: " << e.what() << "\n";
		return 1;
	}
	return 2;
}
