#pragma once

// Evaluation metrics for generated and forecast load profiles.
//
// Sample sets are n x T arrays, one profile per row. Energy distance and
// MMD compare whole profiles (Euclidean over T); KS and Wasserstein compare
// the pooled distribution of all values. ED and MMD are V-statistics (self
// pairs included).

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcpflow/array.hpp"

namespace fcpflow::metrics {

namespace detail {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		const double d = a[i] - b[i];
		s += d * d;
	}
	return std::sqrt(s);
}

inline void require_rows(const Array2 &a, std::size_t n, const char *op) {
	if (a.rows() < n) {
		throw ContractError(std::string(op) + ": need at least " + std::to_string(n) + " samples, got " +
		                    std::to_string(a.rows()));
	}
}

inline void require_same_width(const Array2 &x, const Array2 &y, const char *op) {
	if (x.cols() != y.cols()) {
		throw DimensionError(std::string(op) + ": profile lengths differ (" + std::to_string(x.cols()) + " vs " +
		                     std::to_string(y.cols()) + ")");
	}
}

/// Mean pairwise distance between rows of a and rows of b (all ordered pairs).
inline double mean_distance(const Array2 &a, const Array2 &b) {
	double s = 0.0;
	for (std::size_t i = 0; i < a.rows(); ++i) {
		for (std::size_t j = 0; j < b.rows(); ++j) {
			s += euclidean(a.row(i), b.row(j));
		}
	}
	return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

inline std::vector<double> pooled_sorted(const Array2 &a) {
	std::vector<double> v(a.values().begin(), a.values().end());
	std::sort(v.begin(), v.end());
	return v;
}

} // namespace detail

/// 2 E|x - y| - E|x - x'| - E|y - y'|
inline double energy_distance(const Array2 &x, const Array2 &y) {
	detail::require_rows(x, 2, "energy_distance");
	detail::require_rows(y, 2, "energy_distance");
	detail::require_same_width(x, y, "energy_distance");
	const double value = 2.0 * detail::mean_distance(x, y) - detail::mean_distance(x, x) - detail::mean_distance(y, y);
	return std::max(0.0, value);
}

/// Two-sample KS statistic on pooled values.
inline double ks_distance(const Array2 &x, const Array2 &y) {
	if (x.size() == 0 || y.size() == 0) {
		throw ContractError("ks_distance: empty sample");
	}
	const std::vector<double> a = detail::pooled_sorted(x);
	const std::vector<double> b = detail::pooled_sorted(y);
	const double na = static_cast<double>(a.size());
	const double nb = static_cast<double>(b.size());
	std::size_t i = 0;
	std::size_t j = 0;
	double worst = 0.0;
	while (i < a.size() && j < b.size()) {
		const double v = std::min(a[i], b[j]);
		while (i < a.size() && a[i] == v) {
			++i;
		}
		while (j < b.size() && b[j] == v) {
			++j;
		}
		worst = std::max(worst, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
	}
	return worst;
}

/// 1-Wasserstein distance between pooled empirical distributions,
/// integral of |F_x - F_y|.
inline double wasserstein_1d(const Array2 &x, const Array2 &y) {
	if (x.size() == 0 || y.size() == 0) {
		throw ContractError("wasserstein_1d: empty sample");
	}
	const std::vector<double> a = detail::pooled_sorted(x);
	const std::vector<double> b = detail::pooled_sorted(y);
	const double na = static_cast<double>(a.size());
	const double nb = static_cast<double>(b.size());
	std::size_t i = 0;
	std::size_t j = 0;
	double prev = std::min(a.front(), b.front());
	double total = 0.0;
	while (i < a.size() || j < b.size()) {
		const double v = j >= b.size() || (i < a.size() && a[i] <= b[j]) ? a[i] : b[j];
		total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (v - prev);
		prev = v;
		while (i < a.size() && a[i] == v) {
			++i;
		}
		while (j < b.size() && b[j] == v) {
			++j;
		}
	}
	return total;
}

/// Per-lag autocorrelation averaged over profiles, lags 1..T-1.
struct Autocorrelation {
	std::vector<double> by_lag;
	std::size_t used = 0;
	std::size_t skipped = 0; ///< constant profiles
};

inline Autocorrelation mean_autocorrelation(const Array2 &d) {
	const std::size_t t = d.cols();
	if (t < 3) {
		throw ContractError("autocorrelation: need T >= 3, got " + std::to_string(t));
	}
	Autocorrelation out;
	out.by_lag.assign(t - 1, 0.0);
	for (std::size_t r = 0; r < d.rows(); ++r) {
		const auto row = d.row(r);
		double mean = 0.0;
		for (double v : row) {
			mean += v;
		}
		mean /= static_cast<double>(t);
		double denom = 0.0;
		for (double v : row) {
			denom += (v - mean) * (v - mean);
		}
		if (denom == 0.0) {
			++out.skipped;
			continue;
		}
		++out.used;
		for (std::size_t lag = 1; lag < t; ++lag) {
			double num = 0.0;
			for (std::size_t k = 0; k + lag < t; ++k) {
				num += (row[k] - mean) * (row[k + lag] - mean);
			}
			out.by_lag[lag - 1] += num / denom;
		}
	}
	if (out.used == 0) {
		throw ContractError("autocorrelation: every profile is constant; metric undefined");
	}
	for (double &v : out.by_lag) {
		v /= static_cast<double>(out.used);
	}
	return out;
}

/// sum over lags of (R_lag(x) - R_lag(y))^2
inline double mse_autocorrelation(const Array2 &x, const Array2 &y) {
	detail::require_same_width(x, y, "mse_autocorrelation");
	const Autocorrelation rx = mean_autocorrelation(x);
	const Autocorrelation ry = mean_autocorrelation(y);
	double s = 0.0;
	for (std::size_t l = 0; l < rx.by_lag.size(); ++l) {
		const double d = rx.by_lag[l] - ry.by_lag[l];
		s += d * d;
	}
	return s;
}

/// Median pairwise Euclidean distance over distinct pairs of the pooled
/// profile set.
inline double median_bandwidth(const Array2 &x, const Array2 &y) {
	const Array2 pooled = vconcat(x, y);
	std::vector<double> d;
	d.reserve(pooled.rows() * (pooled.rows() - 1) / 2);
	for (std::size_t i = 0; i < pooled.rows(); ++i) {
		for (std::size_t j = i + 1; j < pooled.rows(); ++j) {
			d.push_back(detail::euclidean(pooled.row(i), pooled.row(j)));
		}
	}
	if (d.empty()) {
		throw ContractError("median_bandwidth: need at least two profiles");
	}
	const std::size_t mid = d.size() / 2;
	std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
	double median = d[mid];
	if (d.size() % 2 == 0) {
		median = 0.5 * (median + *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid)));
	}
	return median;
}

struct MmdResult {
	double value = 0.0;
	double bandwidth = 0.0;
};

/// Gaussian-kernel MMD; bandwidth defaults to the median heuristic.
inline MmdResult mmd_gaussian_detail(const Array2 &x, const Array2 &y, std::optional<double> bandwidth = std::nullopt) {
	detail::require_rows(x, 2, "mmd_gaussian");
	detail::require_rows(y, 2, "mmd_gaussian");
	detail::require_same_width(x, y, "mmd_gaussian");
	double sigma = 0.0;
	if (bandwidth) {
		if (!(*bandwidth > 0.0)) {
			throw ConfigError("mmd_gaussian: bandwidth must be positive");
		}
		sigma = *bandwidth;
	} else {
		sigma = median_bandwidth(x, y);
		if (!(sigma > 0.0)) {
			throw ConfigError("mmd_gaussian: median pairwise distance is 0; supply a bandwidth");
		}
	}
	const double inv = 1.0 / (2.0 * sigma * sigma);
	auto mean_kernel = [&](const Array2 &a, const Array2 &b) {
		double s = 0.0;
		for (std::size_t i = 0; i < a.rows(); ++i) {
			for (std::size_t j = 0; j < b.rows(); ++j) {
				const double d = detail::euclidean(a.row(i), b.row(j));
				s += std::exp(-d * d * inv);
			}
		}
		return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
	};
	const double mmd2 = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
	return {std::sqrt(std::max(0.0, mmd2)), sigma};
}

inline double mmd_gaussian(const Array2 &x, const Array2 &y, std::optional<double> bandwidth = std::nullopt) {
	return mmd_gaussian_detail(x, y, bandwidth).value;
}

/// Pinball loss of one observation against one quantile forecast.
inline double pinball_point(double y_true, double y_pred, double tau) {
	return y_true > y_pred ? tau * (y_true - y_pred) : (1.0 - tau) * (y_pred - y_true);
}

/// Mean pinball loss over time steps and quantile levels. `forecasts` maps
/// each tau to a length-T quantile profile.
inline double pinball(std::span<const double> y_true, const std::map<double, std::vector<double>> &forecasts,
                      std::span<const double> taus) {
	if (taus.empty()) {
		throw ContractError("pinball: no quantile levels");
	}
	double s = 0.0;
	for (double tau : taus) {
		if (!(tau > 0.0 && tau < 1.0)) {
			throw ContractError("pinball: quantile level " + std::to_string(tau) + " outside (0, 1)");
		}
		const auto it = forecasts.find(tau);
		if (it == forecasts.end()) {
			throw ContractError("pinball: missing forecast for quantile " + std::to_string(tau));
		}
		if (it->second.size() != y_true.size()) {
			throw DimensionError("pinball: forecast length differs from observation length");
		}
		for (std::size_t t = 0; t < y_true.size(); ++t) {
			s += pinball_point(y_true[t], it->second[t], tau);
		}
	}
	return s / (static_cast<double>(taus.size()) * static_cast<double>(y_true.size()));
}

/// Ensemble CRPS per step, energy form mean|X - y| - 1/(2 S^2) sum|X_i - X_j|,
/// averaged over time steps.
inline double crps_ensemble(std::span<const double> y_true, const Array2 &ensemble) {
	if (ensemble.rows() < 1) {
		throw ContractError("crps_ensemble: empty ensemble");
	}
	if (ensemble.cols() != y_true.size()) {
		throw DimensionError("crps_ensemble: ensemble width differs from observation length");
	}
	const std::size_t s = ensemble.rows();
	const double ns = static_cast<double>(s);
	double total = 0.0;
	std::vector<double> members(s);
	for (std::size_t t = 0; t < y_true.size(); ++t) {
		double abs_err = 0.0;
		for (std::size_t i = 0; i < s; ++i) {
			members[i] = ensemble(i, t);
			abs_err += std::abs(members[i] - y_true[t]);
		}
		// sum_{i,j} |x_i - x_j| = 2 sum_k (2k - s + 1) x_(k) on sorted members
		std::sort(members.begin(), members.end());
		double spread = 0.0;
		for (std::size_t k = 0; k < s; ++k) {
			spread += (2.0 * static_cast<double>(k) - ns + 1.0) * members[k];
		}
		spread *= 2.0;
		total += abs_err / ns - spread / (2.0 * ns * ns);
	}
	return total / static_cast<double>(y_true.size());
}

/// MSE between the observation and the ensemble mean profile.
inline double mse_mean_prediction(std::span<const double> y_true, const Array2 &ensemble) {
	if (ensemble.rows() < 1) {
		throw ContractError("mse_mean_prediction: empty ensemble");
	}
	if (ensemble.cols() != y_true.size()) {
		throw DimensionError("mse_mean_prediction: ensemble width differs from observation length");
	}
	double s = 0.0;
	for (std::size_t t = 0; t < y_true.size(); ++t) {
		double mean = 0.0;
		for (std::size_t i = 0; i < ensemble.rows(); ++i) {
			mean += ensemble(i, t);
		}
		mean /= static_cast<double>(ensemble.rows());
		s += (y_true[t] - mean) * (y_true[t] - mean);
	}
	return s / static_cast<double>(y_true.size());
}

/// Empirical quantile with linear interpolation between order statistics
/// (position tau * (n - 1)).
inline double empirical_quantile(std::vector<double> values, double tau) {
	if (values.empty()) {
		throw ContractError("empirical_quantile: empty sample");
	}
	std::sort(values.begin(), values.end());
	const double pos = tau * static_cast<double>(values.size() - 1);
	const auto lo = static_cast<std::size_t>(std::floor(pos));
	const std::size_t hi = std::min(lo + 1, values.size() - 1);
	const double frac = pos - static_cast<double>(lo);
	return values[lo] + frac * (values[hi] - values[lo]);
}

/// Per-step quantile profiles of an ensemble (S x T), keyed by tau.
inline std::map<double, std::vector<double>> ensemble_quantiles(const Array2 &ensemble, std::span<const double> taus) {
	std::map<double, std::vector<double>> out;
	std::vector<double> column(ensemble.rows());
	for (double tau : taus) {
		std::vector<double> q(ensemble.cols());
		for (std::size_t t = 0; t < ensemble.cols(); ++t) {
			for (std::size_t i = 0; i < ensemble.rows(); ++i) {
				column[i] = ensemble(i, t);
			}
			q[t] = empirical_quantile(column, tau);
		}
		out.emplace(tau, std::move(q));
	}
	return out;
}

/// Named metric values plus the metadata needed to reproduce them.
struct MetricReport {
	std::map<std::string, double> values;
	std::map<std::string, double> metadata;

	/// Long format: name,value,kind with kind = metric | metadata.
	void write_csv(std::ostream &out) const {
		out << "name,value,kind\n";
		char buf[64];
		for (const auto &[k, v] : values) {
			std::snprintf(buf, sizeof(buf), "%.17g", v);
			out << k << ',' << buf << ",metric\n";
		}
		for (const auto &[k, v] : metadata) {
			std::snprintf(buf, sizeof(buf), "%.17g", v);
			out << k << ',' << buf << ",metadata\n";
		}
	}

	nlohmann::json to_json() const {
		nlohmann::json j;
		j["metrics"] = values;
		j["metadata"] = metadata;
		return j;
	}
};

/// ED, KS, WD, MMD and MSE.A between real and generated profiles.
inline MetricReport generation_report(const Array2 &real, const Array2 &generated,
                                      std::optional<double> bandwidth = std::nullopt) {
	MetricReport r;
	const MmdResult mmd = mmd_gaussian_detail(real, generated, bandwidth);
	const Autocorrelation ar = mean_autocorrelation(real);
	const Autocorrelation ag = mean_autocorrelation(generated);
	r.values["ed"] = energy_distance(real, generated);
	r.values["ks"] = ks_distance(real, generated);
	r.values["wd"] = wasserstein_1d(real, generated);
	r.values["mmd"] = mmd.value;
	r.values["mse_a"] = mse_autocorrelation(real, generated);
	r.metadata["n_real"] = static_cast<double>(real.rows());
	r.metadata["n_gen"] = static_cast<double>(generated.rows());
	r.metadata["bandwidth"] = mmd.bandwidth;
	r.metadata["constant_profiles_skipped"] = static_cast<double>(ar.skipped + ag.skipped);
	return r;
}

/// PL, CRPS and MSE averaged over forecast cases. ensembles[i] is S x T for
/// observation row i of y_true.
inline MetricReport forecast_report(const Array2 &y_true, const std::vector<Array2> &ensembles,
                                    std::span<const double> taus) {
	if (ensembles.size() != y_true.rows()) {
		throw DimensionError("forecast_report: " + std::to_string(ensembles.size()) + " ensembles for " +
		                     std::to_string(y_true.rows()) + " observations");
	}
	if (ensembles.empty()) {
		throw ContractError("forecast_report: no forecast cases");
	}
	double pl = 0.0;
	double crps = 0.0;
	double mse = 0.0;
	std::size_t members = 0;
	for (std::size_t i = 0; i < ensembles.size(); ++i) {
		const auto q = ensemble_quantiles(ensembles[i], taus);
		pl += pinball(y_true.row(i), q, taus);
		crps += crps_ensemble(y_true.row(i), ensembles[i]);
		mse += mse_mean_prediction(y_true.row(i), ensembles[i]);
		members += ensembles[i].rows();
	}
	const double n = static_cast<double>(ensembles.size());
	MetricReport r;
	r.values["pl"] = pl / n;
	r.values["crps"] = crps / n;
	r.values["mse"] = mse / n;
	r.metadata["n_cases"] = n;
	r.metadata["mean_ensemble_size"] = static_cast<double>(members) / n;
	r.metadata["n_quantiles"] = static_cast<double>(taus.size());
	return r;
}

} // namespace fcpflow::metrics
