#pragma once

// Wide CSV layout, one profile-day per row:
//
//   [household_id,][date,]x_0,...,x_{T-1}[,c_<name>...]
//
// `date` is YYYY-MM-DD. Columns named source_row, sample, member or pair_id
// are bookkeeping written by the tools and are skipped on read.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fcpflow/data/dataset.hpp"

namespace fcpflow::data {

namespace detail {

inline std::string trim(std::string s) {
	const auto not_space = [](unsigned char ch) { return !std::isspace(ch); };
	s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
	s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
	return s;
}

inline std::vector<std::string> split_line(const std::string &line) {
	std::vector<std::string> out;
	std::string field;
	std::istringstream in(line);
	while (std::getline(in, field, ',')) {
		out.push_back(trim(field));
	}
	if (!line.empty() && line.back() == ',') {
		out.emplace_back();
	}
	return out;
}

inline bool parse_double(const std::string &s, double &out) {
	if (s.empty()) {
		return false;
	}
	const char *begin = s.data();
	const char *end = s.data() + s.size();
	if (*begin == '+') {
		++begin;
	}
	auto [ptr, ec] = std::from_chars(begin, end, out);
	return ec == std::errc() && ptr == end;
}

inline bool is_bookkeeping(const std::string &name) {
	return name == "source_row" || name == "sample" || name == "member" || name == "pair_id";
}

} // namespace detail

/// Shortest text form that reads back to the same double.
inline std::string format_double(double v) {
	char buf[64];
	auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
	return std::string(buf, ptr);
}

struct CsvReadOptions {
	/// Measured power is never negative; model output can be.
	bool allow_negative = false;
};

inline ProfileDataset parse_csv(std::istream &in, const std::string &source = "<stream>",
                                const CsvReadOptions &options = {}) {
	std::string line;
	std::size_t line_no = 0;
	std::vector<std::string> header;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (!detail::trim(line).empty()) {
			header = detail::split_line(line);
			break;
		}
	}
	if (header.empty()) {
		throw ParseError(source + ": empty file");
	}

	std::map<std::size_t, std::size_t> x_columns; // step index -> csv column
	std::vector<std::pair<std::string, std::size_t>> c_columns;
	std::optional<std::size_t> household_col;
	std::optional<std::size_t> date_col;
	ProfileDataset ds;
	for (std::size_t j = 0; j < header.size(); ++j) {
		const std::string &name = header[j];
		if (name.rfind("x_", 0) == 0) {
			std::size_t idx = 0;
			const char *b = name.data() + 2;
			const char *e = name.data() + name.size();
			auto [ptr, ec] = std::from_chars(b, e, idx);
			if (ec != std::errc() || ptr != e || b == e) {
				throw ParseError(source + ": bad profile column name '" + name + "'");
			}
			if (!x_columns.emplace(idx, j).second) {
				throw ParseError(source + ": duplicate column '" + name + "'");
			}
		} else if (name.rfind("c_", 0) == 0) {
			c_columns.emplace_back(name, j);
		} else if (name == "household_id") {
			household_col = j;
		} else if (name == "date") {
			date_col = j;
		} else if (detail::is_bookkeeping(name)) {
			continue;
		} else {
			ds.warnings.push_back("ignoring unknown column '" + name + "'");
		}
	}
	if (x_columns.empty()) {
		throw ParseError(source + ": header has no x_<i> profile columns");
	}
	const std::size_t t = x_columns.size();
	if (x_columns.rbegin()->first != t - 1) {
		throw ParseError(source + ": profile columns must be x_0..x_" + std::to_string(t - 1));
	}

	std::vector<double> profile_values;
	std::vector<double> condition_values;
	std::size_t rows = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (detail::trim(line).empty()) {
			continue;
		}
		++rows;
		const std::string where = source + ": row " + std::to_string(rows) + " (line " + std::to_string(line_no) + ")";
		const std::vector<std::string> fields = detail::split_line(line);
		if (fields.size() != header.size()) {
			throw ParseError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
			                 std::to_string(fields.size()));
		}
		for (const auto &[step, col] : x_columns) {
			double v = 0.0;
			if (!detail::parse_double(fields[col], v) || !std::isfinite(v)) {
				throw ParseError(where + ": non-numeric value '" + fields[col] + "' in column " + header[col]);
			}
			if (v < 0.0 && !options.allow_negative) {
				throw ParseError(where + ": negative power value " + fields[col] + " in column " + header[col]);
			}
			profile_values.push_back(v);
		}
		for (const auto &[name, col] : c_columns) {
			double v = 0.0;
			if (!detail::parse_double(fields[col], v) || !std::isfinite(v)) {
				throw ParseError(where + ": non-numeric value '" + fields[col] + "' in column " + name);
			}
			condition_values.push_back(v);
		}
		if (household_col) {
			ds.household.push_back(fields[*household_col]);
		}
		if (date_col) {
			const auto d = parse_date(fields[*date_col]);
			if (!d) {
				throw ParseError(where + ": bad date '" + fields[*date_col] + "' (expected YYYY-MM-DD)");
			}
			ds.day.push_back(*d);
		}
	}
	if (rows == 0) {
		throw ParseError(source + ": no data rows");
	}
	ds.profiles = Array2(rows, t, std::move(profile_values));
	ds.conditions = Array2(rows, c_columns.size(), std::move(condition_values));
	ds.profile_labels = default_profile_labels(t);
	for (const auto &[name, col] : c_columns) {
		ds.condition_labels.push_back(name);
	}
	ds.resolution_minutes = resolution_for_length(t);
	if (!is_standard_length(t)) {
		ds.warnings.push_back("profile length " + std::to_string(t) +
		                      " is not a 15/30/60-minute day (96/48/24 steps)");
	}
	return ds;
}

inline ProfileDataset load_csv(const std::string &path, const CsvReadOptions &options = {}) {
	std::ifstream in(path);
	if (!in) {
		throw ParseError("cannot open '" + path + "'");
	}
	return parse_csv(in, path, options);
}

struct CsvColumn {
	std::string name;
	std::vector<std::string> values;
};

/// Writes the dataset in the input schema. `leading` columns (e.g.
/// source_row) go first.
inline void write_csv(std::ostream &out, const ProfileDataset &ds, const std::vector<CsvColumn> &leading = {}) {
	const bool with_household = ds.household.size() == ds.size() && ds.size() > 0;
	const bool with_date = ds.day.size() == ds.size() && ds.size() > 0;
	std::vector<std::string> header;
	for (const auto &c : leading) {
		header.push_back(c.name);
	}
	if (with_household) {
		header.emplace_back("household_id");
	}
	if (with_date) {
		header.emplace_back("date");
	}
	for (std::size_t j = 0; j < ds.profile_length(); ++j) {
		header.push_back("x_" + std::to_string(j));
	}
	for (std::size_t j = 0; j < ds.condition_length(); ++j) {
		std::string name = j < ds.condition_labels.size() ? ds.condition_labels[j] : "c_" + std::to_string(j);
		if (name.rfind("c_", 0) != 0) {
			name = "c_" + name;
		}
		header.push_back(name);
	}
	for (std::size_t j = 0; j < header.size(); ++j) {
		out << (j ? "," : "") << header[j];
	}
	out << '\n';
	for (std::size_t r = 0; r < ds.size(); ++r) {
		bool first = true;
		auto emit = [&](const std::string &s) {
			out << (first ? "" : ",") << s;
			first = false;
		};
		for (const auto &c : leading) {
			emit(c.values.at(r));
		}
		if (with_household) {
			emit(ds.household[r]);
		}
		if (with_date) {
			emit(format_date(ds.day[r]));
		}
		for (double v : ds.profiles.row(r)) {
			emit(format_double(v));
		}
		for (double v : ds.conditions.row(r)) {
			emit(format_double(v));
		}
		out << '\n';
	}
}

inline void write_csv(const std::string &path, const ProfileDataset &ds, const std::vector<CsvColumn> &leading = {}) {
	std::ofstream out(path);
	if (!out) {
		throw ParseError("cannot write '" + path + "'");
	}
	write_csv(out, ds, leading);
}

/// Header plus raw fields, for files that do not follow the profile schema
/// (condition-only files, bookkeeping columns).
struct CsvTable {
	std::vector<std::string> header;
	std::vector<std::vector<std::string>> rows;

	std::optional<std::size_t> column(const std::string &name) const {
		const auto it = std::find(header.begin(), header.end(), name);
		if (it == header.end()) {
			return std::nullopt;
		}
		return static_cast<std::size_t>(it - header.begin());
	}
};

inline CsvTable read_table(const std::string &path) {
	std::ifstream in(path);
	if (!in) {
		throw ParseError("cannot open '" + path + "'");
	}
	CsvTable table;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r') {
			line.pop_back();
		}
		if (detail::trim(line).empty()) {
			continue;
		}
		std::vector<std::string> fields = detail::split_line(line);
		if (table.header.empty()) {
			table.header = std::move(fields);
			continue;
		}
		if (fields.size() != table.header.size()) {
			throw ParseError(path + ": row " + std::to_string(table.rows.size() + 1) + " (line " +
			                 std::to_string(line_no) + "): expected " + std::to_string(table.header.size()) +
			                 " fields, found " + std::to_string(fields.size()));
		}
		table.rows.push_back(std::move(fields));
	}
	if (table.header.empty()) {
		throw ParseError(path + ": empty file");
	}
	return table;
}

/// The c_* columns of a table as a numeric matrix, in file order.
inline Array2 condition_columns(const CsvTable &table, std::vector<std::string> *labels = nullptr) {
	std::vector<std::size_t> cols;
	for (std::size_t j = 0; j < table.header.size(); ++j) {
		if (table.header[j].rfind("c_", 0) == 0) {
			cols.push_back(j);
			if (labels != nullptr) {
				labels->push_back(table.header[j]);
			}
		}
	}
	Array2 out(table.rows.size(), cols.size());
	for (std::size_t r = 0; r < table.rows.size(); ++r) {
		for (std::size_t k = 0; k < cols.size(); ++k) {
			double v = 0.0;
			const std::string &field = table.rows[r][cols[k]];
			if (!detail::parse_double(field, v) || !std::isfinite(v)) {
				throw ParseError("row " + std::to_string(r + 1) + ": non-numeric value '" + field + "' in column " +
				                 table.header[cols[k]]);
			}
			out(r, k) = v;
		}
	}
	return out;
}

} // namespace fcpflow::data
