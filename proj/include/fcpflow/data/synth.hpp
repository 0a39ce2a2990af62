#pragma once

// Synthetic stand-ins for smart-meter datasets, used by tests and demos.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fcpflow/data/dataset.hpp"
#include "fcpflow/linalg.hpp"

namespace fcpflow::data {

enum class SynthKind {
	/// N(mean, Sigma) with Sigma_ij = sigma^2 rho^|i-j|.
	correlated_gaussian,
	/// Households whose days blend a morning-peak and an evening-peak shape;
	/// the blend weight and amplitude persist from day to day.
	archetype_mixture,
	/// profile = c * base_shape + noise with c ~ U(0.5, 2) stored as the
	/// single condition column c_scale.
	condition_scaled,
};

struct SynthSpec {
	SynthKind kind = SynthKind::archetype_mixture;
	double rho = 0.8;
	double sigma = 1.0;
	std::vector<double> mean; ///< correlated_gaussian only; empty means zeros
	double noise = 0.05;      ///< kW, archetype_mixture and condition_scaled
	std::size_t days_per_household = 30;
	double weight_drift = 0.08; ///< day-to-day std of the blend weight
};

inline double morning_shape(double hour) {
	return 0.25 + 1.2 * std::exp(-0.5 * std::pow((hour - 7.5) / 1.5, 2.0));
}

inline double evening_shape(double hour) {
	return 0.25 + 1.5 * std::exp(-0.5 * std::pow((hour - 19.0) / 2.0, 2.0));
}

/// Hour of day at the middle of step t of a T-step day.
inline double step_hour(std::size_t t, std::size_t steps) {
	return (static_cast<double>(t) + 0.5) * 24.0 / static_cast<double>(steps);
}

inline ProfileDataset synth_generate(const SynthSpec &spec, std::size_t n, std::size_t t, std::uint64_t seed) {
	if (t < 1 || n < 1) {
		throw ConfigError("synth_generate: need n >= 1 and T >= 1");
	}
	Rng rng(seed);
	std::normal_distribution<double> normal(0.0, 1.0);
	ProfileDataset ds;
	ds.profiles = Array2(n, t);
	ds.profile_labels = default_profile_labels(t);
	ds.resolution_minutes = resolution_for_length(t);

	switch (spec.kind) {
	case SynthKind::correlated_gaussian: {
		if (!(spec.rho > -1.0 && spec.rho < 1.0)) {
			throw ConfigError("synth_generate: rho must lie in (-1, 1), got " + std::to_string(spec.rho));
		}
		if (!spec.mean.empty() && spec.mean.size() != t) {
			throw ConfigError("synth_generate: mean has " + std::to_string(spec.mean.size()) + " entries, T = " +
			                  std::to_string(t));
		}
		const double innovation = spec.sigma * std::sqrt(1.0 - spec.rho * spec.rho);
		for (std::size_t r = 0; r < n; ++r) {
			double prev = spec.sigma * normal(rng);
			for (std::size_t j = 0; j < t; ++j) {
				if (j > 0) {
					prev = spec.rho * prev + innovation * normal(rng);
				}
				ds.profiles(r, j) = prev + (spec.mean.empty() ? 0.0 : spec.mean[j]);
			}
		}
		ds.conditions = Array2(n, 0);
		break;
	}
	case SynthKind::archetype_mixture: {
		std::uniform_real_distribution<double> unit(0.0, 1.0);
		std::uniform_real_distribution<double> amplitude(0.6, 1.6);
		const std::size_t days = std::max<std::size_t>(spec.days_per_household, 1);
		const std::int64_t start = days_from_civil(2023, 1, 1);
		double weight = 0.0;
		double level = 1.0;
		for (std::size_t r = 0; r < n; ++r) {
			const std::size_t d = r % days;
			if (d == 0) {
				weight = unit(rng);
				level = amplitude(rng);
			} else {
				weight = std::clamp(weight + spec.weight_drift * normal(rng), 0.0, 1.0);
			}
			const double day_level = level * std::exp(0.1 * normal(rng));
			for (std::size_t j = 0; j < t; ++j) {
				const double h = step_hour(j, t);
				const double mean = day_level * (weight * morning_shape(h) + (1.0 - weight) * evening_shape(h));
				ds.profiles(r, j) = std::max(0.0, mean + spec.noise * normal(rng));
			}
			ds.household.push_back("h" + std::to_string(r / days));
			ds.day.push_back(start + static_cast<std::int64_t>(d));
		}
		ds.conditions = Array2(n, 0);
		break;
	}
	case SynthKind::condition_scaled: {
		std::uniform_real_distribution<double> scale(0.5, 2.0);
		ds.conditions = Array2(n, 1);
		ds.condition_labels = {"c_scale"};
		for (std::size_t r = 0; r < n; ++r) {
			const double c = scale(rng);
			ds.conditions(r, 0) = c;
			for (std::size_t j = 0; j < t; ++j) {
				const double h = step_hour(j, t);
				const double base = 0.5 * (morning_shape(h) + evening_shape(h));
				ds.profiles(r, j) = std::max(0.0, c * base + spec.noise * normal(rng));
			}
		}
		break;
	}
	}
	return ds;
}

} // namespace fcpflow::data
