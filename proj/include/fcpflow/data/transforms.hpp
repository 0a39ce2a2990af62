#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fcpflow/data/dataset.hpp"
#include "fcpflow/linalg.hpp"

namespace fcpflow::data {

struct ConditionSource {
	enum class Kind {
		daily_total,  ///< row sum converted to kWh
		annual_total, ///< sum of daily totals per household and calendar year
		column,       ///< pass an existing c_* column through
	};
	Kind kind;
	std::string column; ///< only for Kind::column

	static ConditionSource daily_total() {
		return {Kind::daily_total, {}};
	}
	static ConditionSource annual_total() {
		return {Kind::annual_total, {}};
	}
	static ConditionSource from_column(std::string name) {
		return {Kind::column, std::move(name)};
	}
};

/// kWh per row: sum(power) * resolution / 60.
inline std::vector<double> daily_totals(const ProfileDataset &ds) {
	std::vector<double> out(ds.size(), 0.0);
	for (std::size_t r = 0; r < ds.size(); ++r) {
		for (double v : ds.profiles.row(r)) {
			out[r] += v;
		}
		out[r] *= ds.resolution_minutes / 60.0;
	}
	return out;
}

/// Replaces the condition matrix with the requested columns, in order.
inline ProfileDataset derive_conditions(const ProfileDataset &ds, const std::vector<ConditionSource> &sources) {
	std::vector<std::vector<double>> columns;
	std::vector<std::string> labels;
	for (const ConditionSource &src : sources) {
		switch (src.kind) {
		case ConditionSource::Kind::daily_total:
			columns.push_back(daily_totals(ds));
			labels.emplace_back("c_daily");
			break;
		case ConditionSource::Kind::annual_total: {
			if (!ds.has_calendar()) {
				throw ConfigError("derive_conditions: annual total needs household_id and date columns");
			}
			const std::vector<double> daily = daily_totals(ds);
			std::map<std::pair<std::string, std::int64_t>, double> totals;
			auto key = [&](std::size_t r) { return std::make_pair(ds.household[r], civil_from_days(ds.day[r]).year); };
			for (std::size_t r = 0; r < ds.size(); ++r) {
				totals[key(r)] += daily[r];
			}
			std::vector<double> col(ds.size());
			for (std::size_t r = 0; r < ds.size(); ++r) {
				col[r] = totals[key(r)];
			}
			columns.push_back(std::move(col));
			labels.emplace_back("c_annual");
			break;
		}
		case ConditionSource::Kind::column: {
			const auto it = std::find(ds.condition_labels.begin(), ds.condition_labels.end(), src.column);
			if (it == ds.condition_labels.end()) {
				throw ConfigError("derive_conditions: no condition column '" + src.column + "'");
			}
			const auto j = static_cast<std::size_t>(it - ds.condition_labels.begin());
			std::vector<double> col(ds.size());
			for (std::size_t r = 0; r < ds.size(); ++r) {
				col[r] = ds.conditions(r, j);
			}
			columns.push_back(std::move(col));
			labels.push_back(src.column);
			break;
		}
		}
	}
	ProfileDataset out = ds;
	out.conditions = Array2(ds.size(), columns.size());
	for (std::size_t j = 0; j < columns.size(); ++j) {
		for (std::size_t r = 0; r < ds.size(); ++r) {
			out.conditions(r, j) = columns[j][r];
		}
	}
	out.condition_labels = std::move(labels);
	return out;
}

/// Seeded random split; the first part gets round(fraction * N) rows,
/// at least one and at most N - 1.
inline std::pair<ProfileDataset, ProfileDataset> split(const ProfileDataset &ds, double fraction, std::uint64_t seed) {
	if (!(fraction > 0.0 && fraction < 1.0)) {
		throw ConfigError("split: fraction must lie in (0, 1)");
	}
	const std::size_t n = ds.size();
	if (n < 2) {
		throw ContractError("split: need at least 2 rows");
	}
	std::vector<std::size_t> index(n);
	std::iota(index.begin(), index.end(), 0);
	Rng rng(seed);
	std::shuffle(index.begin(), index.end(), rng);
	auto first = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
	first = std::clamp<std::size_t>(first, 1, n - 1);
	std::vector<std::size_t> a(index.begin(), index.begin() + static_cast<std::ptrdiff_t>(first));
	std::vector<std::size_t> b(index.begin() + static_cast<std::ptrdiff_t>(first), index.end());
	std::sort(a.begin(), a.end());
	std::sort(b.begin(), b.end());
	return {ds.subset(a), ds.subset(b)};
}

struct WindowResult {
	ProfileDataset pairs;  ///< profile = day d+1, condition = day d
	std::size_t gaps = 0;  ///< adjacent records per household that were not consecutive days
};

/// Pairs each household-day with the previous calendar day of the same
/// household.
inline WindowResult window_day_pairs(const ProfileDataset &ds) {
	if (!ds.has_calendar()) {
		throw ConfigError("window_day_pairs: dataset needs household_id and date columns");
	}
	std::vector<std::size_t> order(ds.size());
	std::iota(order.begin(), order.end(), 0);
	std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
		return std::tie(ds.household[a], ds.day[a]) < std::tie(ds.household[b], ds.day[b]);
	});
	const std::size_t t = ds.profile_length();
	std::vector<std::size_t> prev_rows;
	std::vector<std::size_t> next_rows;
	WindowResult result;
	for (std::size_t i = 1; i < order.size(); ++i) {
		const std::size_t a = order[i - 1];
		const std::size_t b = order[i];
		if (ds.household[a] != ds.household[b]) {
			continue;
		}
		if (ds.day[b] == ds.day[a] + 1) {
			prev_rows.push_back(a);
			next_rows.push_back(b);
		} else {
			++result.gaps;
		}
	}
	if (next_rows.empty()) {
		throw ContractError("window_day_pairs: no consecutive day pairs found");
	}
	ProfileDataset &out = result.pairs;
	out = ds.subset(next_rows);
	out.conditions = gather_rows(ds.profiles, prev_rows);
	out.condition_labels.clear();
	for (std::size_t j = 0; j < t; ++j) {
		out.condition_labels.push_back("c_prev_" + std::to_string(j));
	}
	return result;
}

} // namespace fcpflow::data
