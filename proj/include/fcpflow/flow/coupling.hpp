#pragma once

// Combining coupling layer with soft-clamped scales.
//
// Normalizing direction (data -> latent), x split into even/odd columns:
//   z1 = exp(s1(x1; c)) * x2 + t1(x1; c)
//   z2 = exp(s2(z1; c)) * x1 + t2(z1; c)
// log|det| per row = sum(s1) + sum(s2) over the clamped scales.
//
// The two output halves are interleaved so that the half with ceil(n/2)
// columns lands on the even positions: (z1, z2) for even n, (z2, z1) for
// odd n.

#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fcpflow/autodiff.hpp"
#include "fcpflow/flow/mlp.hpp"

namespace fcpflow {

struct ClampConfig {
	double alpha = 0.6;
	/// Reject alpha outside [0.1, 1].
	bool validate_range = true;

	void check() const {
		if (!(alpha > 0.0)) {
			throw ConfigError("soft clamp: alpha must be positive, got " + std::to_string(alpha));
		}
		if (validate_range && (alpha < 0.1 || alpha > 1.0)) {
			throw ConfigError("soft clamp: alpha " + std::to_string(alpha) +
			                  " outside [0.1, 1] (set validate_range = false to override)");
		}
	}
};

/// (2 alpha / pi) * atan(s / alpha); bounded by alpha in magnitude.
inline Array2 soft_clamp(const Array2 &s_raw, double alpha) {
	if (!(alpha > 0.0)) {
		throw ConfigError("soft_clamp: alpha must be positive");
	}
	Array2 out(s_raw.rows(), s_raw.cols());
	for (std::size_t i = 0; i < s_raw.size(); ++i) {
		out[i] = 2.0 * alpha / std::numbers::pi * std::atan(s_raw[i] / alpha);
	}
	return out;
}

inline ad::Var soft_clamp(ad::Var s_raw, double alpha) {
	if (!(alpha > 0.0)) {
		throw ConfigError("soft_clamp: alpha must be positive");
	}
	return ad::scale(ad::atan(ad::scale(s_raw, 1.0 / alpha)), 2.0 * alpha / std::numbers::pi);
}

/// The four conditioner networks of one coupling layer. s1/t1 read the even
/// half plus condition and act on the odd half; s2/t2 read the transformed
/// odd half plus condition and act on the even half.
struct CouplingNets {
	Mlp s1;
	Mlp t1;
	Mlp s2;
	Mlp t2;

	static CouplingNets create(std::size_t width, std::size_t condition, std::size_t hidden, std::size_t hidden_layers,
	                           Rng &rng) {
		if (width < 2) {
			throw DimensionError("coupling layer: width must be >= 2, got " + std::to_string(width));
		}
		const std::size_t even = (width + 1) / 2;
		const std::size_t odd = width / 2;
		CouplingNets nets;
		nets.s1 = Mlp::create(even + condition, hidden, hidden_layers, odd, rng);
		nets.t1 = Mlp::create(even + condition, hidden, hidden_layers, odd, rng);
		nets.s2 = Mlp::create(odd + condition, hidden, hidden_layers, even, rng);
		nets.t2 = Mlp::create(odd + condition, hidden, hidden_layers, even, rng);
		return nets;
	}

	std::size_t width() const {
		return s1.output_width() + s2.output_width();
	}
	std::size_t condition_width() const {
		return s1.input_width() - s2.output_width();
	}
};

/// Output of a normalizing pass recorded on a tape; logdet is batch x 1.
struct TapeFlow {
	ad::Var z;
	ad::Var logdet;
};

/// Output of an eager normalizing pass.
struct FlowResult {
	Array2 z;
	std::vector<double> logdet;
};

namespace detail {

inline void check_coupling_shapes(const Array2 &x, const Array2 &c, const CouplingNets &nets) {
	if (x.cols() < 2) {
		throw DimensionError("coupling layer: need at least 2 columns, got " + std::to_string(x.cols()));
	}
	if (x.cols() != nets.width()) {
		throw DimensionError("coupling layer: input has " + std::to_string(x.cols()) + " columns, nets expect " +
		                     std::to_string(nets.width()));
	}
	if (c.rows() != x.rows()) {
		throw DimensionError("coupling layer: condition rows " + std::to_string(c.rows()) + " != data rows " +
		                     std::to_string(x.rows()));
	}
	if (c.cols() != nets.condition_width()) {
		throw DimensionError("coupling layer: condition has " + std::to_string(c.cols()) + " columns, nets expect " +
		                     std::to_string(nets.condition_width()));
	}
}

inline void check_finite(const Array2 &a, const char *what) {
	if (!a.all_finite()) {
		throw NumericError(std::string("coupling layer: non-finite ") + what);
	}
}

inline std::vector<double> column_vector(const Array2 &a) {
	return {a.values().begin(), a.values().end()};
}

} // namespace detail

inline TapeFlow coupling_normalize(ParamBinder &bind, ad::Var x, ad::Var c, const CouplingNets &nets,
                                   const ClampConfig &clamp) {
	ad::Tape &tape = bind.tape();
	detail::check_coupling_shapes(tape.value(x), tape.value(c), nets);
	auto [x1, x2] = ad::split_even_odd(x);

	const ad::Var in1 = ad::concat_cols(x1, c);
	const ad::Var s1 = soft_clamp(nets.s1.forward(bind, in1), clamp.alpha);
	const ad::Var t1 = nets.t1.forward(bind, in1);
	const ad::Var z1 = ad::exp(s1) * x2 + t1;

	const ad::Var in2 = ad::concat_cols(z1, c);
	const ad::Var s2 = soft_clamp(nets.s2.forward(bind, in2), clamp.alpha);
	const ad::Var t2 = nets.t2.forward(bind, in2);
	const ad::Var z2 = ad::exp(s2) * x1 + t2;

	const bool even_width = tape.value(x).cols() % 2 == 0;
	const ad::Var z = even_width ? ad::interleave(z1, z2) : ad::interleave(z2, z1);
	detail::check_finite(tape.value(z), "output");
	const ad::Var logdet = ad::reduce_sum(s1, ad::Axis::cols) + ad::reduce_sum(s2, ad::Axis::cols);
	return {z, logdet};
}

inline FlowResult coupling_normalize(const Array2 &x, const Array2 &c, const CouplingNets &nets,
                                     const ClampConfig &clamp) {
	ad::Tape tape;
	ParamBinder bind(tape, false);
	const TapeFlow out = coupling_normalize(bind, tape.constant(x), tape.constant(c), nets, clamp);
	return {tape.value(out.z), detail::column_vector(tape.value(out.logdet))};
}

inline Array2 coupling_generate(const Array2 &z, const Array2 &c, const CouplingNets &nets, const ClampConfig &clamp) {
	detail::check_coupling_shapes(z, c, nets);
	const std::size_t n = z.rows();
	const std::size_t width = z.cols();
	const std::size_t even = (width + 1) / 2;
	const std::size_t odd = width / 2;
	const bool even_width = width % 2 == 0;

	// z1 has odd-many columns, z2 even-many; see the layout note above.
	Array2 z1(n, odd);
	Array2 z2(n, even);
	for (std::size_t r = 0; r < n; ++r) {
		for (std::size_t j = 0; j < width; ++j) {
			const std::size_t k = j / 2;
			const bool at_even = j % 2 == 0;
			if (even_width == at_even) {
				z1(r, k) = z(r, j);
			} else {
				z2(r, k) = z(r, j);
			}
		}
	}

	const Array2 in2 = hconcat(z1, c);
	const Array2 s2 = soft_clamp(nets.s2(in2), clamp.alpha);
	const Array2 t2 = nets.t2(in2);
	Array2 x1(n, even);
	for (std::size_t i = 0; i < x1.size(); ++i) {
		x1[i] = (z2[i] - t2[i]) * std::exp(-s2[i]);
	}

	const Array2 in1 = hconcat(x1, c);
	const Array2 s1 = soft_clamp(nets.s1(in1), clamp.alpha);
	const Array2 t1 = nets.t1(in1);
	Array2 x2(n, odd);
	for (std::size_t i = 0; i < x2.size(); ++i) {
		x2[i] = (z1[i] - t1[i]) * std::exp(-s1[i]);
	}

	Array2 x(n, width);
	for (std::size_t r = 0; r < n; ++r) {
		for (std::size_t j = 0; j < width; ++j) {
			x(r, j) = j % 2 == 0 ? x1(r, j / 2) : x2(r, j / 2);
		}
	}
	detail::check_finite(x, "generated values");
	return x;
}

} // namespace fcpflow
