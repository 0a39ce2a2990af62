#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcpflow/array.hpp"

namespace fcpflow::data {

/// One row per household-day. Profiles are active power per step; the
/// optional household/day columns are needed for annual totals and for
/// day-pair windowing.
struct ProfileDataset {
	Array2 profiles;   ///< N x T
	Array2 conditions; ///< N x B, B may be 0
	std::vector<std::string> profile_labels;
	std::vector<std::string> condition_labels;
	double resolution_minutes = 60.0;

	std::vector<std::string> household; ///< empty or N entries
	std::vector<std::int64_t> day;      ///< days since 1970-01-01; empty or N entries

	std::vector<std::string> warnings;

	std::size_t size() const noexcept {
		return profiles.rows();
	}
	std::size_t profile_length() const noexcept {
		return profiles.cols();
	}
	std::size_t condition_length() const noexcept {
		return conditions.cols();
	}
	bool has_calendar() const noexcept {
		return !household.empty() && !day.empty();
	}

	/// Rows picked by index, all per-row columns included.
	ProfileDataset subset(std::span<const std::size_t> index) const {
		ProfileDataset out;
		out.profiles = gather_rows(profiles, index);
		out.conditions = gather_rows(conditions, index);
		out.profile_labels = profile_labels;
		out.condition_labels = condition_labels;
		out.resolution_minutes = resolution_minutes;
		if (!household.empty()) {
			for (std::size_t i : index) {
				out.household.push_back(household[i]);
			}
		}
		if (!day.empty()) {
			for (std::size_t i : index) {
				out.day.push_back(day[i]);
			}
		}
		return out;
	}
};

inline std::vector<std::string> default_profile_labels(std::size_t t) {
	std::vector<std::string> labels;
	for (std::size_t i = 0; i < t; ++i) {
		labels.push_back("x_" + std::to_string(i));
	}
	return labels;
}

/// Minutes per step for a one-day profile of length t.
inline double resolution_for_length(std::size_t t) {
	return t == 0 ? 0.0 : 1440.0 / static_cast<double>(t);
}

inline bool is_standard_length(std::size_t t) {
	return t == 24 || t == 48 || t == 96;
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
	y -= m <= 2 ? 1 : 0;
	const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
	const auto yoe = static_cast<unsigned>(y - era * 400);
	const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
	const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
	return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

struct CivilDate {
	std::int64_t year;
	unsigned month;
	unsigned day;
};

inline CivilDate civil_from_days(std::int64_t z) {
	z += 719468;
	const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
	const auto doe = static_cast<unsigned>(z - era * 146097);
	const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
	const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
	const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
	const unsigned mp = (5 * doy + 2) / 153;
	const unsigned d = doy - (153 * mp + 2) / 5 + 1;
	const unsigned m = mp < 10 ? mp + 3 : mp - 9;
	return {y + (m <= 2 ? 1 : 0), m, d};
}

/// Parses YYYY-MM-DD; rejects dates that do not exist.
inline std::optional<std::int64_t> parse_date(const std::string &s) {
	if (s.size() != 10 || s[4] != '-' || s[7] != '-') {
		return std::nullopt;
	}
	for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
		if (s[i] < '0' || s[i] > '9') {
			return std::nullopt;
		}
	}
	const int y = std::stoi(s.substr(0, 4));
	const auto m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
	const auto d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
	if (m < 1 || m > 12 || d < 1 || d > 31) {
		return std::nullopt;
	}
	const std::int64_t days = days_from_civil(y, m, d);
	const CivilDate back = civil_from_days(days);
	if (back.month != m || back.day != d) {
		return std::nullopt;
	}
	return days;
}

inline std::string format_date(std::int64_t days) {
	const CivilDate c = civil_from_days(days);
	char buf[32];
	std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u", static_cast<long long>(c.year), c.month, c.day);
	return buf;
}

} // namespace fcpflow::data
