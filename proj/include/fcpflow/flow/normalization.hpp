#pragma once

// Invertible normalization: z = (x - gamma) / sqrt(beta^2 + eps), with
// gamma the mean and beta the standard deviation of the layer input.
// log|det| per row = -sum_i log(|beta_i| + eps).

#include <cmath>
#include <string>
#include <vector>

#include "fcpflow/autodiff.hpp"
#include "fcpflow/flow/coupling.hpp"

namespace fcpflow {

enum class Mode {
	training,  ///< batch statistics, running estimates updated
	inference, ///< running estimates, frozen
};

/// Running statistics of one normalization layer. These are not trainable.
struct NormState {
	std::vector<double> gamma; ///< running mean
	std::vector<double> beta;  ///< running standard deviation
	double eps = 1e-6;
	double momentum = 0.1;
	bool populated = false;

	static NormState empty(std::size_t width, double eps = 1e-6, double momentum = 0.1) {
		return {std::vector<double>(width, 0.0), std::vector<double>(width, 1.0), eps, momentum, false};
	}

	std::size_t width() const noexcept {
		return gamma.size();
	}

	/// run <- (1 - m) run + m batch. The first update copies the batch.
	void update(std::span<const double> batch_mean, std::span<const double> batch_std) {
		for (std::size_t i = 0; i < gamma.size(); ++i) {
			if (populated) {
				gamma[i] = (1.0 - momentum) * gamma[i] + momentum * batch_mean[i];
				beta[i] = (1.0 - momentum) * beta[i] + momentum * batch_std[i];
			} else {
				gamma[i] = batch_mean[i];
				beta[i] = batch_std[i];
			}
		}
		populated = true;
	}

	double log_abs_det() const {
		double s = 0.0;
		for (double b : beta) {
			s -= std::log(std::abs(b) + eps);
		}
		return s;
	}
};

namespace detail {

inline void check_norm_width(const Array2 &x, const NormState &state) {
	if (x.cols() != state.width()) {
		throw DimensionError("normalization layer: input has " + std::to_string(x.cols()) +
		                     " columns, state has " + std::to_string(state.width()));
	}
}

inline void require_populated(const NormState &state) {
	if (!state.populated) {
		throw StateError("normalization layer: running statistics were never populated");
	}
}

} // namespace detail

/// Records the normalizing pass on a tape. In training mode the batch
/// statistics are part of the graph; when `update` is given the running
/// estimates are moved towards them (outside the graph).
inline TapeFlow norm_normalize(ad::Var x, const NormState &state, Mode mode, NormState *update = nullptr) {
	ad::Tape &tape = *x.tape;
	const Array2 &xv = tape.value(x);
	detail::check_norm_width(xv, state);
	const std::size_t n = xv.rows();
	const std::size_t width = state.width();

	if (mode == Mode::inference) {
		detail::require_populated(state);
		Array2 shift(1, width);
		Array2 inv_scale(1, width);
		for (std::size_t i = 0; i < width; ++i) {
			shift(0, i) = state.gamma[i];
			inv_scale(0, i) = 1.0 / std::sqrt(state.beta[i] * state.beta[i] + state.eps);
		}
		const ad::Var z = (x - ad::broadcast_rows(tape.constant(shift), n)) *
		                  ad::broadcast_rows(tape.constant(inv_scale), n);
		return {z, tape.constant(Array2(n, 1, state.log_abs_det()))};
	}

	if (n < 2) {
		throw ContractError("normalization layer: training mode needs a batch of at least 2 rows");
	}
	const ad::Var mean = ad::reduce_mean(x, ad::Axis::rows);
	const ad::Var centered = x - ad::broadcast_rows(mean, n);
	const ad::Var var = ad::reduce_mean(ad::square(centered), ad::Axis::rows);
	const ad::Var z = centered / ad::broadcast_rows(ad::sqrt(ad::add_scalar(var, state.eps)), n);
	const ad::Var std_dev = ad::sqrt(var);
	const ad::Var logdet_scalar = ad::neg(ad::reduce_sum(ad::log(ad::add_scalar(std_dev, state.eps))));
	const ad::Var logdet = ad::broadcast_rows(logdet_scalar, n);
	if (update != nullptr) {
		update->update(tape.value(mean).values(), tape.value(std_dev).values());
	}
	return {z, logdet};
}

inline FlowResult norm_normalize(const Array2 &x, NormState &state, Mode mode) {
	ad::Tape tape;
	const TapeFlow out = norm_normalize(tape.constant(x), state, mode, mode == Mode::training ? &state : nullptr);
	return {tape.value(out.z), detail::column_vector(tape.value(out.logdet))};
}

/// x = z * sqrt(beta^2 + eps) + gamma using the running estimates.
inline Array2 norm_generate(const Array2 &z, const NormState &state) {
	detail::check_norm_width(z, state);
	detail::require_populated(state);
	Array2 x(z.rows(), z.cols());
	for (std::size_t r = 0; r < z.rows(); ++r) {
		for (std::size_t i = 0; i < z.cols(); ++i) {
			x(r, i) = z(r, i) * std::sqrt(state.beta[i] * state.beta[i] + state.eps) + state.gamma[i];
		}
	}
	return x;
}

} // namespace fcpflow
