#pragma once

// Independent reference computations used only by the tests. Nothing here
// calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "fcpflow/array.hpp"

namespace oracle {

using fcpflow::Array2;

/// Central-difference Jacobian of a row map R^T -> R^T evaluated at x.
inline Eigen::MatrixXd numeric_jacobian(const std::function<std::vector<double>(const std::vector<double> &)> &f,
                                        const std::vector<double> &x, double h = 1e-5) {
	const std::size_t n = x.size();
	const std::size_t m = f(x).size();
	Eigen::MatrixXd jac(m, n);
	std::vector<double> probe = x;
	for (std::size_t j = 0; j < n; ++j) {
		probe[j] = x[j] + h;
		const auto up = f(probe);
		probe[j] = x[j] - h;
		const auto down = f(probe);
		probe[j] = x[j];
		for (std::size_t i = 0; i < m; ++i) {
			jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (up[i] - down[i]) / (2.0 * h);
		}
	}
	return jac;
}

inline double log_abs_det(const Eigen::MatrixXd &m) {
	return std::log(std::abs(m.fullPivLu().determinant()));
}

inline Eigen::MatrixXd to_eigen(const Array2 &a) {
	Eigen::MatrixXd m(a.rows(), a.cols());
	for (std::size_t i = 0; i < a.rows(); ++i) {
		for (std::size_t j = 0; j < a.cols(); ++j) {
			m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a(i, j);
		}
	}
	return m;
}

inline double distance(const Array2 &a, std::size_t i, const Array2 &b, std::size_t j) {
	double s = 0.0;
	for (std::size_t t = 0; t < a.cols(); ++t) {
		s += (a(i, t) - b(j, t)) * (a(i, t) - b(j, t));
	}
	return std::sqrt(s);
}

/// Energy distance by enumerating every ordered pair.
inline double energy_distance(const Array2 &x, const Array2 &y) {
	double xy = 0.0;
	double xx = 0.0;
	double yy = 0.0;
	for (std::size_t i = 0; i < x.rows(); ++i) {
		for (std::size_t j = 0; j < y.rows(); ++j) {
			xy += distance(x, i, y, j);
		}
		for (std::size_t k = 0; k < x.rows(); ++k) {
			xx += distance(x, i, x, k);
		}
	}
	for (std::size_t j = 0; j < y.rows(); ++j) {
		for (std::size_t k = 0; k < y.rows(); ++k) {
			yy += distance(y, j, y, k);
		}
	}
	const double nx = static_cast<double>(x.rows());
	const double ny = static_cast<double>(y.rows());
	return 2.0 * xy / (nx * ny) - xx / (nx * nx) - yy / (ny * ny);
}

inline double ecdf(const std::vector<double> &v, double t) {
	return static_cast<double>(std::count_if(v.begin(), v.end(), [t](double a) { return a <= t; })) /
	       static_cast<double>(v.size());
}

inline std::vector<double> pooled(const Array2 &a) {
	return {a.values().begin(), a.values().end()};
}

/// KS by evaluating both step CDFs at every pooled value.
inline double ks_distance(const Array2 &x, const Array2 &y) {
	const auto a = pooled(x);
	const auto b = pooled(y);
	double worst = 0.0;
	for (const auto *v : {&a, &b}) {
		for (double t : *v) {
			worst = std::max(worst, std::abs(ecdf(a, t) - ecdf(b, t)));
		}
	}
	return worst;
}

/// W1 through the quantile functions: integral over u of |F^-1(u) - G^-1(u)|.
inline double wasserstein_1d(const Array2 &x, const Array2 &y) {
	auto a = pooled(x);
	auto b = pooled(y);
	std::sort(a.begin(), a.end());
	std::sort(b.begin(), b.end());
	std::set<double> cuts{0.0, 1.0};
	for (std::size_t k = 1; k < a.size(); ++k) {
		cuts.insert(static_cast<double>(k) / static_cast<double>(a.size()));
	}
	for (std::size_t k = 1; k < b.size(); ++k) {
		cuts.insert(static_cast<double>(k) / static_cast<double>(b.size()));
	}
	auto quantile = [](const std::vector<double> &v, double u) {
		const auto k = static_cast<std::size_t>(std::floor(u * static_cast<double>(v.size())));
		return v[std::min(k, v.size() - 1)];
	};
	double total = 0.0;
	for (auto it = std::next(cuts.begin()); it != cuts.end(); ++it) {
		const double lo = *std::prev(it);
		const double hi = *it;
		const double mid = 0.5 * (lo + hi);
		total += (hi - lo) * std::abs(quantile(a, mid) - quantile(b, mid));
	}
	return total;
}

inline double mmd(const Array2 &x, const Array2 &y, double sigma) {
	auto k = [&](const Array2 &a, std::size_t i, const Array2 &b, std::size_t j) {
		const double d = distance(a, i, b, j);
		return std::exp(-d * d / (2.0 * sigma * sigma));
	};
	double kxx = 0.0;
	double kyy = 0.0;
	double kxy = 0.0;
	for (std::size_t i = 0; i < x.rows(); ++i) {
		for (std::size_t j = 0; j < x.rows(); ++j) {
			kxx += k(x, i, x, j);
		}
		for (std::size_t j = 0; j < y.rows(); ++j) {
			kxy += k(x, i, y, j);
		}
	}
	for (std::size_t i = 0; i < y.rows(); ++i) {
		for (std::size_t j = 0; j < y.rows(); ++j) {
			kyy += k(y, i, y, j);
		}
	}
	const double nx = static_cast<double>(x.rows());
	const double ny = static_cast<double>(y.rows());
	const double v = kxx / (nx * nx) + kyy / (ny * ny) - 2.0 * kxy / (nx * ny);
	return std::sqrt(std::max(0.0, v));
}

/// Lag-l autocorrelation of one profile written out as correlation of the
/// centered series with its shift, then averaged over profiles.
inline std::vector<double> autocorrelation(const Array2 &d) {
	const std::size_t t = d.cols();
	std::vector<double> acc(t - 1, 0.0);
	std::size_t used = 0;
	for (std::size_t r = 0; r < d.rows(); ++r) {
		Eigen::VectorXd v(t);
		for (std::size_t k = 0; k < t; ++k) {
			v(static_cast<Eigen::Index>(k)) = d(r, k);
		}
		v.array() -= v.mean();
		const double denom = v.squaredNorm();
		if (denom == 0.0) {
			continue;
		}
		++used;
		for (std::size_t lag = 1; lag < t; ++lag) {
			const auto len = static_cast<Eigen::Index>(t - lag);
			acc[lag - 1] += v.head(len).dot(v.tail(len)) / denom;
		}
	}
	for (double &a : acc) {
		a /= static_cast<double>(used);
	}
	return acc;
}

inline double mse_autocorrelation(const Array2 &x, const Array2 &y) {
	const auto a = autocorrelation(x);
	const auto b = autocorrelation(y);
	double s = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		s += (a[i] - b[i]) * (a[i] - b[i]);
	}
	return s;
}

/// CRPS of one step by exact piecewise integration of (F(z) - 1{z >= y})^2.
inline double crps_step(std::vector<double> members, double y) {
	std::vector<double> knots = members;
	knots.push_back(y);
	std::sort(knots.begin(), knots.end());
	std::sort(members.begin(), members.end());
	double total = 0.0;
	for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
		const double lo = knots[k];
		const double hi = knots[k + 1];
		if (hi <= lo) {
			continue;
		}
		const double mid = 0.5 * (lo + hi);
		const double f = ecdf(members, mid);
		const double h = mid >= y ? 1.0 : 0.0;
		total += (hi - lo) * (f - h) * (f - h);
	}
	return total;
}

inline double crps(const std::vector<double> &y, const Array2 &ensemble) {
	double s = 0.0;
	for (std::size_t t = 0; t < y.size(); ++t) {
		std::vector<double> members;
		for (std::size_t i = 0; i < ensemble.rows(); ++i) {
			members.push_back(ensemble(i, t));
		}
		s += crps_step(members, y[t]);
	}
	return s / static_cast<double>(y.size());
}

/// Spearman rank correlation (no ties expected).
inline double spearman(const std::vector<double> &a, const std::vector<double> &b) {
	auto ranks = [](const std::vector<double> &v) {
		std::vector<std::size_t> idx(v.size());
		for (std::size_t i = 0; i < v.size(); ++i) {
			idx[i] = i;
		}
		std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
		std::vector<double> r(v.size());
		for (std::size_t k = 0; k < idx.size(); ++k) {
			r[idx[k]] = static_cast<double>(k);
		}
		return r;
	};
	const auto ra = ranks(a);
	const auto rb = ranks(b);
	const double n = static_cast<double>(a.size());
	const double mean = (n - 1.0) / 2.0;
	double num = 0.0;
	double da = 0.0;
	double db = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		num += (ra[i] - mean) * (rb[i] - mean);
		da += (ra[i] - mean) * (ra[i] - mean);
		db += (rb[i] - mean) * (rb[i] - mean);
	}
	return num / std::sqrt(da * db);
}

} // namespace oracle
