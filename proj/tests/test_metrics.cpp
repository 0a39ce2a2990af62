#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "fcpflow/linalg.hpp"
#include "fcpflow/metrics.hpp"
#include "oracles.hpp"

using fcpflow::Array2;
using fcpflow::Rng;
namespace fc = fcpflow;
namespace m = fcpflow::metrics;

namespace {

std::vector<double> row_of(const Array2 &a, std::size_t r) {
	const auto s = a.row(r);
	return {s.begin(), s.end()};
}

/// Values on a coarse lattice so ties occur between and within samples.
Array2 lattice_array(std::size_t r, std::size_t c, Rng &rng) {
	std::uniform_int_distribution<int> pick(-3, 3);
	Array2 a(r, c);
	for (double &v : a.values()) {
		v = 0.5 * pick(rng);
	}
	return a;
}

} // namespace

// energy distance

TEST(EnergyDistance, Examples) {
	const Array2 x{{0.0}, {2.0}};
	const Array2 y{{1.0}, {1.0}};
	EXPECT_DOUBLE_EQ(m::energy_distance(x, y), 1.0);
	EXPECT_EQ(m::energy_distance(x, x), 0.0);
	const Array2 a{{1.0, 2.0}, {1.0, 2.0}};
	const Array2 b{{4.0, 6.0}, {4.0, 6.0}};
	EXPECT_DOUBLE_EQ(m::energy_distance(a, b), 2.0 * 5.0);
	EXPECT_THROW(m::energy_distance(Array2{{1.0}}, y), fc::ContractError);
	EXPECT_THROW(m::energy_distance(a, Array2{{1.0}, {2.0}}), fc::DimensionError);
}

// KS

TEST(KsDistance, Examples) {
	EXPECT_DOUBLE_EQ(m::ks_distance(Array2{{0.0}, {1.0}}, Array2{{0.5}, {1.5}}), 0.5);
	EXPECT_EQ(m::ks_distance(Array2{{1.0, 2.0}}, Array2{{2.0, 1.0}}), 0.0);
	EXPECT_EQ(m::ks_distance(Array2{{0.0, 1.0}}, Array2{{5.0, 6.0, 7.0}}), 1.0);
	EXPECT_THROW(m::ks_distance(Array2(0, 2), Array2{{1.0}}), fc::ContractError);
}

// Wasserstein

TEST(Wasserstein, Examples) {
	EXPECT_EQ(m::wasserstein_1d(Array2{{0.0}}, Array2{{1.0}}), 1.0);
	EXPECT_EQ(m::wasserstein_1d(Array2{{0.0, 0.0}}, Array2{{0.0, 2.0}}), 1.0);
	EXPECT_EQ(m::wasserstein_1d(Array2{{0.3, 0.7}}, Array2{{0.7, 0.3}}), 0.0);
	EXPECT_THROW(m::wasserstein_1d(Array2{{1.0}}, Array2(0, 0)), fc::ContractError);
}

// autocorrelation

TEST(Autocorrelation, IdenticalAndAlternating) {
	Rng rng(1);
	const Array2 x = fc::normal_array(4, 6, rng);
	EXPECT_EQ(m::mse_autocorrelation(x, x), 0.0);
	const Array2 alt1{{1, -1, 1, -1, 1, -1}, {-1, 1, -1, 1, -1, 1}};
	const Array2 alt2{{2, -2, 2, -2, 2, -2}};
	EXPECT_NEAR(m::mse_autocorrelation(alt1, alt2), 0.0, 1e-15);
}

TEST(Autocorrelation, HandCase) {
	// T = 4, two explicit profiles per set, checked against the
	// correlation-of-shifts oracle.
	const Array2 x{{1, 2, 3, 4}, {4, 1, 3, 2}};
	const Array2 y{{0, 1, 0, 1}, {2, 2, 5, 1}};
	EXPECT_NEAR(m::mse_autocorrelation(x, y), oracle::mse_autocorrelation(x, y), 1e-12);
	// Hand value of lag-1 for (1,2,3,4): centered (-1.5,-0.5,0.5,1.5),
	// numerator 0.75 - 0.25 + 0.75 = 1.25, denominator 5.
	const Array2 single{{1, 2, 3, 4}};
	EXPECT_NEAR(m::mean_autocorrelation(single).by_lag[0], 0.25, 1e-15);
}

TEST(Autocorrelation, ConstantProfilesSkippedOrRejected) {
	const Array2 x{{1, 1, 1, 1}, {1, 2, 3, 4}};
	const m::Autocorrelation a = m::mean_autocorrelation(x);
	EXPECT_EQ(a.skipped, 1u);
	EXPECT_EQ(a.used, 1u);
	EXPECT_THROW(m::mean_autocorrelation(Array2{{2, 2, 2}}), fc::ContractError);
	EXPECT_THROW(m::mean_autocorrelation(Array2{{1, 2}}), fc::ContractError);
}

// MMD

TEST(Mmd, Examples) {
	Rng rng(2);
	const Array2 x = fc::normal_array(5, 3, rng);
	EXPECT_EQ(m::mmd_gaussian(x, x), 0.0);

	const double d = 1.7;
	const double sigma = 0.9;
	const Array2 a{{0.0, 0.0}, {0.0, 0.0}};
	const Array2 b{{d, 0.0}, {d, 0.0}};
	EXPECT_NEAR(m::mmd_gaussian(a, b, sigma), std::sqrt(2.0 - 2.0 * std::exp(-d * d / (2.0 * sigma * sigma))), 1e-15);
}

TEST(Mmd, SmallCaseMatchesDoubleSum) {
	Rng rng(3);
	const Array2 x = fc::normal_array(3, 2, rng);
	const Array2 y = fc::normal_array(3, 2, rng);
	EXPECT_NEAR(m::mmd_gaussian(x, y, 1.0), oracle::mmd(x, y, 1.0), 1e-12);
}

TEST(Mmd, MedianBandwidth) {
	// Pairwise distances among {0, 1, 3, 6}: 1,3,6,2,5,3 -> median 3.
	const Array2 x{{0.0}, {1.0}};
	const Array2 y{{3.0}, {6.0}};
	EXPECT_DOUBLE_EQ(m::median_bandwidth(x, y), 3.0);
	const m::MmdResult r = m::mmd_gaussian_detail(x, y);
	EXPECT_DOUBLE_EQ(r.bandwidth, 3.0);
	EXPECT_NEAR(r.value, oracle::mmd(x, y, 3.0), 1e-12);
}

TEST(Mmd, DegenerateBandwidthIsAnError) {
	const Array2 x{{1.0, 1.0}, {1.0, 1.0}};
	EXPECT_THROW(m::mmd_gaussian(x, x), fc::ConfigError);
	EXPECT_EQ(m::mmd_gaussian(x, x, 1.0), 0.0);
}

// forecast metrics

TEST(Pinball, Examples) {
	EXPECT_DOUBLE_EQ(m::pinball_point(1.0, 0.0, 0.5), 0.5);
	EXPECT_DOUBLE_EQ(m::pinball_point(2.0, 1.0, 0.9), 0.9);
	EXPECT_NEAR(m::pinball_point(1.0, 2.0, 0.9), 0.1, 1e-15);
	const std::vector<double> y{1.0, 2.0, 3.0};
	const std::vector<double> taus{0.1, 0.5, 0.9};
	std::map<double, std::vector<double>> perfect;
	for (double tau : taus) {
		perfect[tau] = y;
	}
	EXPECT_EQ(m::pinball(y, perfect, taus), 0.0);
	const std::vector<double> missing{0.1, 0.3};
	EXPECT_THROW(m::pinball(y, perfect, missing), fc::ContractError);
}

TEST(Pinball, MedianIsHalfMae) {
	Rng rng(4);
	const Array2 y = fc::normal_array(1, 8, rng);
	const Array2 p = fc::normal_array(1, 8, rng);
	const std::vector<double> taus{0.5};
	const std::map<double, std::vector<double>> f{{0.5, row_of(p, 0)}};
	double mae = 0.0;
	for (std::size_t t = 0; t < 8; ++t) {
		mae += std::abs(y[t] - p[t]);
	}
	EXPECT_NEAR(m::pinball(row_of(y, 0), f, taus), 0.5 * mae / 8.0, 1e-15);
}

TEST(Crps, Examples) {
	const std::vector<double> y{1.0};
	EXPECT_DOUBLE_EQ(m::crps_ensemble(y, Array2{{0.0}, {1.0}}), 0.25);
	EXPECT_EQ(m::crps_ensemble(y, Array2{{1.0}, {1.0}, {1.0}}), 0.0);
	EXPECT_DOUBLE_EQ(m::crps_ensemble(y, Array2{{3.5}, {3.5}}), 2.5);
	EXPECT_THROW(m::crps_ensemble(y, Array2(0, 1)), fc::ContractError);
}

TEST(Crps, DeterministicEnsembleEqualsMae) {
	Rng rng(5);
	for (int rep = 0; rep < 10; ++rep) {
		const Array2 y = fc::normal_array(1, 24, rng);
		const Array2 point = fc::normal_array(1, 24, rng);
		Array2 ensemble(7, 24);
		for (std::size_t i = 0; i < 7; ++i) {
			for (std::size_t t = 0; t < 24; ++t) {
				ensemble(i, t) = point(0, t);
			}
		}
		double mae = 0.0;
		for (std::size_t t = 0; t < 24; ++t) {
			mae += std::abs(point(0, t) - y(0, t));
		}
		EXPECT_NEAR(m::crps_ensemble(row_of(y, 0), ensemble), mae / 24.0, 1e-12);
	}
}

TEST(MseMeanPrediction, Examples) {
	const std::vector<double> y{0.0};
	EXPECT_EQ(m::mse_mean_prediction(y, Array2{{0.0}, {2.0}}), 1.0);
	const std::vector<double> z{2.0, 3.0};
	EXPECT_EQ(m::mse_mean_prediction(z, Array2{{1.0, 2.0}, {1.0, 2.0}}), 1.0);
	EXPECT_EQ(m::mse_mean_prediction(z, Array2{{1.0, 4.0}, {3.0, 2.0}}), 0.0);
}

TEST(EmpiricalQuantile, LinearInterpolation) {
	EXPECT_DOUBLE_EQ(m::empirical_quantile({3, 1, 2, 4}, 0.5), 2.5);
	EXPECT_DOUBLE_EQ(m::empirical_quantile({3, 1, 2, 4}, 0.0), 1.0);
	EXPECT_DOUBLE_EQ(m::empirical_quantile({3, 1, 2, 4}, 1.0), 4.0);
	EXPECT_DOUBLE_EQ(m::empirical_quantile({0, 10}, 0.25), 2.5);
}

// brute-force agreement and properties

TEST(MetricOracles, RandomSmallInstancesMatchBruteForce) {
	for (std::uint64_t seed = 0; seed < 200; ++seed) {
		Rng rng(seed);
		std::uniform_int_distribution<std::size_t> nd(2, 5);
		std::uniform_int_distribution<std::size_t> td(3, 4);
		const std::size_t t = td(rng);
		const bool ties = seed % 2 == 0;
		const Array2 x = ties ? lattice_array(nd(rng), t, rng) : fc::normal_array(nd(rng), t, rng);
		const Array2 y = ties ? lattice_array(nd(rng), t, rng) : fc::normal_array(nd(rng), t, rng);
		SCOPED_TRACE("seed " + std::to_string(seed));
		EXPECT_NEAR(m::energy_distance(x, y), oracle::energy_distance(x, y), 1e-12);
		EXPECT_NEAR(m::ks_distance(x, y), oracle::ks_distance(x, y), 1e-12);
		EXPECT_NEAR(m::wasserstein_1d(x, y), oracle::wasserstein_1d(x, y), 1e-12);
		EXPECT_NEAR(m::mmd_gaussian(x, y, 1.3), oracle::mmd(x, y, 1.3), 1e-12);
		bool usable = true;
		try {
			oracle::mse_autocorrelation(x, y);
			m::mean_autocorrelation(x);
			m::mean_autocorrelation(y);
		} catch (const fc::ContractError &) {
			usable = false;
		}
		if (usable) {
			EXPECT_NEAR(m::mse_autocorrelation(x, y), oracle::mse_autocorrelation(x, y), 1e-12);
		}
		const std::vector<double> obs = row_of(y, 0);
		EXPECT_NEAR(m::crps_ensemble(obs, x), oracle::crps(obs, x), 1e-12);
	}
}

TEST(MetricProperties, SymmetricNonNegativeAndZeroOnSelf) {
	for (std::uint64_t seed = 0; seed < 30; ++seed) {
		Rng rng(seed + 1000);
		const Array2 x = fc::normal_array(6, 5, rng);
		const Array2 y = fc::normal_array(4, 5, rng);
		const m::MetricReport xy = m::generation_report(x, y);
		const m::MetricReport yx = m::generation_report(y, x);
		for (const auto &[name, v] : xy.values) {
			EXPECT_GE(v, 0.0) << name;
			EXPECT_NEAR(v, yx.values.at(name), 1e-12) << name;
		}
		for (const auto &[name, v] : m::generation_report(x, x).values) {
			EXPECT_EQ(v, 0.0) << name;
		}
	}
}

// reports

TEST(MetricReport, GenerationReportCarriesMetadata) {
	Rng rng(9);
	const Array2 x = fc::normal_array(6, 4, rng);
	const Array2 y = fc::normal_array(8, 4, rng);
	const m::MetricReport r = m::generation_report(x, y);
	EXPECT_EQ(r.values.size(), 5u);
	EXPECT_EQ(r.metadata.at("n_real"), 6.0);
	EXPECT_EQ(r.metadata.at("n_gen"), 8.0);
	EXPECT_EQ(r.metadata.at("bandwidth"), m::median_bandwidth(x, y));
	EXPECT_EQ(r.values.at("ed"), m::energy_distance(x, y));
	std::ostringstream csv;
	r.write_csv(csv);
	EXPECT_EQ(csv.str().rfind("name,value,kind\n", 0), 0u);
	EXPECT_NE(csv.str().find("ed,"), std::string::npos);
	EXPECT_TRUE(r.to_json().contains("metrics"));
}

TEST(MetricReport, ForecastReportAveragesCases) {
	const Array2 y{{1.0, 2.0}, {0.0, 0.0}};
	const std::vector<Array2> ensembles{Array2{{1.0, 2.0}, {1.0, 2.0}}, Array2{{1.0, -1.0}, {1.0, -1.0}}};
	const std::vector<double> taus{0.05, 0.5, 0.95};
	const m::MetricReport r = m::forecast_report(y, ensembles, taus);
	EXPECT_NEAR(r.values.at("crps"), 0.5, 1e-15);
	EXPECT_NEAR(r.values.at("mse"), 0.5, 1e-15);
	const auto q = m::ensemble_quantiles(ensembles[1], taus);
	const double pl = m::pinball(row_of(y, 1), q, taus) / 2.0;
	EXPECT_NEAR(r.values.at("pl"), pl, 1e-15);
	EXPECT_THROW(m::forecast_report(y, {ensembles[0]}, taus), fc::DimensionError);
}

TEST(MetricReport, PerfectDeterministicForecastScoresZero) {
	const Array2 y{{1.0, 2.0, 3.0}};
	const std::vector<Array2> ensembles{Array2{{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}};
	const std::vector<double> taus{0.05, 0.5, 0.95};
	for (const auto &[name, v] : m::forecast_report(y, ensembles, taus).values) {
		EXPECT_EQ(v, 0.0) << name;
	}
}
