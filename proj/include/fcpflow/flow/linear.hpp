#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fcpflow/autodiff.hpp"
#include "fcpflow/flow/coupling.hpp"
#include "fcpflow/linalg.hpp"

namespace fcpflow {

/// Invertible linear map across time steps, M = P L U, applied as z = M x
/// in the normalizing direction. M plays the role of W^-1; generation
/// solves M x = z.
///
/// Only the strictly lower entries of `lower`, the strictly upper entries of
/// `upper` and `log_diag` are trainable; diag(U) = sign * exp(log_diag), so
/// log|det M| = sum(log_diag).
struct LinearFactor {
	std::vector<std::size_t> perm; ///< (P v)[i] = v[perm[i]]
	std::vector<double> sign;      ///< +-1, fixed
	Array2 lower;                  ///< T x T, strictly lower part used
	Array2 upper;                  ///< T x T, strictly upper part used
	Array2 log_diag;               ///< 1 x T

	static LinearFactor identity(std::size_t width) {
		LinearFactor f;
		f.perm.resize(width);
		std::iota(f.perm.begin(), f.perm.end(), 0);
		f.sign.assign(width, 1.0);
		f.lower = Array2(width, width);
		f.upper = Array2(width, width);
		f.log_diag = Array2(1, width);
		return f;
	}

	static LinearFactor from_matrix(const Array2 &m) {
		PluFactors plu = plu_decompose(m);
		const std::size_t width = m.rows();
		LinearFactor f;
		f.perm = std::move(plu.perm);
		f.sign.resize(width);
		f.lower = Array2(width, width);
		f.upper = Array2(width, width);
		f.log_diag = Array2(1, width);
		for (std::size_t i = 0; i < width; ++i) {
			for (std::size_t j = 0; j < width; ++j) {
				if (j < i) {
					f.lower(i, j) = plu.lower(i, j);
				} else if (j > i) {
					f.upper(i, j) = plu.upper(i, j);
				}
			}
			const double d = plu.upper(i, i);
			f.sign[i] = d < 0.0 ? -1.0 : 1.0;
			f.log_diag(0, i) = std::log(std::abs(d));
		}
		return f;
	}

	static LinearFactor random_rotation(std::size_t width, Rng &rng) {
		return from_matrix(random_orthogonal(width, rng));
	}

	std::size_t width() const noexcept {
		return perm.size();
	}

	Array2 lower_matrix() const {
		Array2 l = Array2::identity(width());
		for (std::size_t i = 0; i < width(); ++i) {
			for (std::size_t j = 0; j < i; ++j) {
				l(i, j) = lower(i, j);
			}
		}
		return l;
	}

	Array2 upper_matrix() const {
		Array2 u(width(), width());
		for (std::size_t i = 0; i < width(); ++i) {
			u(i, i) = sign[i] * std::exp(log_diag(0, i));
			for (std::size_t j = i + 1; j < width(); ++j) {
				u(i, j) = upper(i, j);
			}
		}
		return u;
	}

	/// Dense M = P L U.
	Array2 matrix() const {
		const Array2 lu = fcpflow::matmul(lower_matrix(), upper_matrix());
		Array2 m(width(), width());
		for (std::size_t i = 0; i < width(); ++i) {
			for (std::size_t j = 0; j < width(); ++j) {
				m(i, j) = lu(perm[i], j);
			}
		}
		return m;
	}

	double log_abs_det() const {
		double s = 0.0;
		for (double v : log_diag.values()) {
			s += v;
		}
		return s;
	}
};

namespace detail {

inline void check_linear_width(const Array2 &x, const LinearFactor &f) {
	if (x.cols() != f.width()) {
		throw DimensionError("linear layer: input has " + std::to_string(x.cols()) + " columns, factor is " +
		                     std::to_string(f.width()) + " wide");
	}
}

} // namespace detail

/// Row-wise z = M x, i.e. Z = X U^T L^T P^T.
inline TapeFlow linear_normalize(ParamBinder &bind, ad::Var x, const LinearFactor &f) {
	ad::Tape &tape = bind.tape();
	const Array2 &xv = tape.value(x);
	detail::check_linear_width(xv, f);
	const std::size_t n = xv.rows();
	const std::size_t width = f.width();

	Array2 lower_mask(width, width);
	Array2 upper_mask(width, width);
	for (std::size_t i = 0; i < width; ++i) {
		for (std::size_t j = 0; j < width; ++j) {
			lower_mask(i, j) = j < i ? 1.0 : 0.0;
			upper_mask(i, j) = j > i ? 1.0 : 0.0;
		}
	}
	const ad::Var log_diag = bind(f.log_diag);
	const ad::Var lower = bind(f.lower) * tape.constant(lower_mask) + tape.constant(Array2::identity(width));
	const ad::Var strict_upper = bind(f.upper) * tape.constant(upper_mask);
	const ad::Var diag = tape.constant(Array2::row_vector(f.sign)) * ad::exp(log_diag);

	const ad::Var ux = ad::matmul(x, ad::transpose(strict_upper)) + x * ad::broadcast_rows(diag, n);
	const ad::Var lux = ad::matmul(ux, ad::transpose(lower));
	const ad::Var z = ad::gather_cols(lux, f.perm);
	const ad::Var logdet = ad::broadcast_rows(ad::reduce_sum(log_diag), n);
	return {z, logdet};
}

inline FlowResult linear_normalize(const Array2 &x, const LinearFactor &f) {
	ad::Tape tape;
	ParamBinder bind(tape, false);
	const TapeFlow out = linear_normalize(bind, tape.constant(x), f);
	return {tape.value(out.z), detail::column_vector(tape.value(out.logdet))};
}

/// Solves M x = z row-wise by un-permuting and two triangular solves.
inline Array2 linear_generate(const Array2 &z, const LinearFactor &f) {
	detail::check_linear_width(z, f);
	const std::size_t width = f.width();
	std::vector<double> diag(width);
	for (std::size_t i = 0; i < width; ++i) {
		diag[i] = f.sign[i] * std::exp(f.log_diag(0, i));
	}
	Array2 x(z.rows(), width);
	std::vector<double> w(width);
	for (std::size_t r = 0; r < z.rows(); ++r) {
		for (std::size_t i = 0; i < width; ++i) {
			w[f.perm[i]] = z(r, i);
		}
		// L y = w
		for (std::size_t i = 0; i < width; ++i) {
			double acc = w[i];
			for (std::size_t j = 0; j < i; ++j) {
				acc -= f.lower(i, j) * w[j];
			}
			w[i] = acc;
		}
		// U x = y
		for (std::size_t i = width; i-- > 0;) {
			double acc = w[i];
			for (std::size_t j = i + 1; j < width; ++j) {
				acc -= f.upper(i, j) * w[j];
			}
			w[i] = acc / diag[i];
		}
		std::copy(w.begin(), w.end(), x.row(r).begin());
	}
	return x;
}

} // namespace fcpflow
