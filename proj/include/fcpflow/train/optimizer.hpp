#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fcpflow/array.hpp"

namespace fcpflow::train {

/// Adaptive-moment optimizer state, one accumulator pair per parameter.
struct OptimizerState {
	std::vector<Array2> first_moment;
	std::vector<Array2> second_moment;
	std::size_t step = 0;
	double beta1 = 0.9;
	double beta2 = 0.999;
	double epsilon = 1e-8;
};

/// Global L2 norm over every gradient entry.
inline double global_norm(std::span<const Array2> grads) {
	double s = 0.0;
	for (const Array2 &g : grads) {
		for (double v : g.values()) {
			s += v * v;
		}
	}
	return std::sqrt(s);
}

/// Scales grads in place so their global norm is at most max_norm.
/// Returns the norm before clipping.
inline double clip_global_norm(std::span<Array2> grads, double max_norm) {
	const double norm = global_norm(grads);
	if (max_norm > 0.0 && norm > max_norm) {
		const double k = max_norm / norm;
		for (Array2 &g : grads) {
			for (double &v : g.values()) {
				v *= k;
			}
		}
	}
	return norm;
}

/// One clipped adaptive-moment update. Gradients are checked for NaN/Inf
/// before clipping. `grads` is modified by clipping.
inline void optimizer_step(std::span<Array2 *const> params, std::span<Array2> grads, OptimizerState &state, double lr,
                           double clip_norm) {
	if (params.size() != grads.size()) {
		throw DimensionError("optimizer_step: " + std::to_string(params.size()) + " parameters, " +
		                     std::to_string(grads.size()) + " gradients");
	}
	for (std::size_t p = 0; p < grads.size(); ++p) {
		if (!params[p]->same_shape(grads[p])) {
			throw DimensionError("optimizer_step: gradient " + std::to_string(p) + " has shape " +
			                     grads[p].shape_string() + ", parameter " + params[p]->shape_string());
		}
		if (!grads[p].all_finite()) {
			throw NumericError("optimizer_step: non-finite gradient for parameter " + std::to_string(p));
		}
	}
	if (state.first_moment.empty()) {
		for (const Array2 *p : params) {
			state.first_moment.emplace_back(p->rows(), p->cols());
			state.second_moment.emplace_back(p->rows(), p->cols());
		}
	} else if (state.first_moment.size() != params.size()) {
		throw DimensionError("optimizer_step: optimizer state tracks a different parameter set");
	}
	clip_global_norm(grads, clip_norm);
	++state.step;
	const double t = static_cast<double>(state.step);
	const double correction1 = 1.0 - std::pow(state.beta1, t);
	const double correction2 = 1.0 - std::pow(state.beta2, t);
	for (std::size_t p = 0; p < params.size(); ++p) {
		Array2 &theta = *params[p];
		Array2 &m = state.first_moment[p];
		Array2 &v = state.second_moment[p];
		const Array2 &g = grads[p];
		for (std::size_t i = 0; i < theta.size(); ++i) {
			m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
			v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
			const double m_hat = m[i] / correction1;
			const double v_hat = v[i] / correction2;
			theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
		}
	}
}

} // namespace fcpflow::train
