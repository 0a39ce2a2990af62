#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fcpflow/data/dataset.hpp"

namespace fcpflow::data {

/// Profiles: per-step standardization with training mean/std (std floored
/// at 1e-8). Conditions: min-max to [0, 1] with training extremes; values
/// outside are clipped to [-0.5, 1.5].
struct Scaler {
	static constexpr double kStdFloor = 1e-8;
	static constexpr double kClipLow = -0.5;
	static constexpr double kClipHigh = 1.5;

	std::vector<double> profile_mean;
	std::vector<double> profile_std;
	std::vector<double> condition_min;
	std::vector<double> condition_max;
	std::string method = "profile:per-step-standard;condition:min-max";

	Array2 transform_profiles(const Array2 &x) const {
		check_width(x, profile_mean.size(), "profiles");
		Array2 out(x.rows(), x.cols());
		for (std::size_t r = 0; r < x.rows(); ++r) {
			for (std::size_t j = 0; j < x.cols(); ++j) {
				out(r, j) = (x(r, j) - profile_mean[j]) / profile_std[j];
			}
		}
		return out;
	}

	Array2 inverse_profiles(const Array2 &z) const {
		check_width(z, profile_mean.size(), "profiles");
		Array2 out(z.rows(), z.cols());
		for (std::size_t r = 0; r < z.rows(); ++r) {
			for (std::size_t j = 0; j < z.cols(); ++j) {
				out(r, j) = z(r, j) * profile_std[j] + profile_mean[j];
			}
		}
		return out;
	}

	/// `clipped`, when given, receives the number of entries that hit the
	/// clip range.
	Array2 transform_conditions(const Array2 &c, std::size_t *clipped = nullptr) const {
		check_width(c, condition_min.size(), "conditions");
		Array2 out(c.rows(), c.cols());
		std::size_t count = 0;
		for (std::size_t r = 0; r < c.rows(); ++r) {
			for (std::size_t j = 0; j < c.cols(); ++j) {
				double v = (c(r, j) - condition_min[j]) / (condition_max[j] - condition_min[j]);
				if (v < kClipLow || v > kClipHigh) {
					++count;
					v = std::clamp(v, kClipLow, kClipHigh);
				}
				out(r, j) = v;
			}
		}
		if (clipped != nullptr) {
			*clipped = count;
		}
		return out;
	}

	Array2 inverse_conditions(const Array2 &u) const {
		check_width(u, condition_min.size(), "conditions");
		Array2 out(u.rows(), u.cols());
		for (std::size_t r = 0; r < u.rows(); ++r) {
			for (std::size_t j = 0; j < u.cols(); ++j) {
				out(r, j) = u(r, j) * (condition_max[j] - condition_min[j]) + condition_min[j];
			}
		}
		return out;
	}

private:
	static void check_width(const Array2 &a, std::size_t expected, const char *what) {
		if (a.cols() != expected) {
			throw DimensionError(std::string("scaler: ") + what + " have " + std::to_string(a.cols()) +
			                     " columns, scaler was fitted on " + std::to_string(expected));
		}
	}
};

/// Fit on the training split only.
inline Scaler fit_scaler(const ProfileDataset &train) {
	if (train.size() == 0) {
		throw ContractError("fit_scaler: empty dataset");
	}
	Scaler s;
	const std::size_t n = train.size();
	const std::size_t t = train.profile_length();
	s.profile_mean.assign(t, 0.0);
	s.profile_std.assign(t, 0.0);
	for (std::size_t j = 0; j < t; ++j) {
		double mean = 0.0;
		for (std::size_t r = 0; r < n; ++r) {
			mean += train.profiles(r, j);
		}
		mean /= static_cast<double>(n);
		double var = 0.0;
		for (std::size_t r = 0; r < n; ++r) {
			const double d = train.profiles(r, j) - mean;
			var += d * d;
		}
		var /= static_cast<double>(n);
		s.profile_mean[j] = mean;
		s.profile_std[j] = std::max(std::sqrt(var), Scaler::kStdFloor);
	}
	const std::size_t b = train.condition_length();
	s.condition_min.assign(b, 0.0);
	s.condition_max.assign(b, 0.0);
	for (std::size_t j = 0; j < b; ++j) {
		double lo = train.conditions(0, j);
		double hi = lo;
		for (std::size_t r = 1; r < n; ++r) {
			lo = std::min(lo, train.conditions(r, j));
			hi = std::max(hi, train.conditions(r, j));
		}
		if (!(hi > lo)) {
			const std::string name =
			    j < train.condition_labels.size() ? train.condition_labels[j] : "c[" + std::to_string(j) + "]";
			throw ScaleError("fit_scaler: condition column '" + name + "' is constant on the training split");
		}
		s.condition_min[j] = lo;
		s.condition_max[j] = hi;
	}
	return s;
}

struct ScaleReport {
	std::size_t clipped_conditions = 0;
};

inline ProfileDataset apply_scaler(const ProfileDataset &d, const Scaler &s, ScaleReport *report = nullptr) {
	ProfileDataset out = d;
	out.profiles = s.transform_profiles(d.profiles);
	std::size_t clipped = 0;
	out.conditions = s.transform_conditions(d.conditions, &clipped);
	if (report != nullptr) {
		report->clipped_conditions = clipped;
	}
	if (clipped > 0) {
		out.warnings.push_back(std::to_string(clipped) + " condition values clipped to [-0.5, 1.5]");
	}
	return out;
}

inline ProfileDataset invert_scaler(const ProfileDataset &d, const Scaler &s) {
	ProfileDataset out = d;
	out.profiles = s.inverse_profiles(d.profiles);
	out.conditions = s.inverse_conditions(d.conditions);
	return out;
}

} // namespace fcpflow::data
