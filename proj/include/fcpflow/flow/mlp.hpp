#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "fcpflow/autodiff.hpp"
#include "fcpflow/linalg.hpp"

namespace fcpflow {

/// Maps parameter arrays onto tape nodes. A trainable binder records each
/// bound parameter so the caller can read gradients back after backward().
class ParamBinder {
public:
	ParamBinder(ad::Tape &tape, bool trainable) : tape_(&tape), trainable_(trainable) {
	}

	ad::Var operator()(const Array2 &param) {
		if (!trainable_) {
			return tape_->constant(param);
		}
		ad::Var v = tape_->leaf(param);
		bound_.emplace_back(&param, v);
		return v;
	}

	ad::Tape &tape() const noexcept {
		return *tape_;
	}
	bool trainable() const noexcept {
		return trainable_;
	}
	const std::vector<std::pair<const Array2 *, ad::Var>> &bound() const noexcept {
		return bound_;
	}

private:
	ad::Tape *tape_;
	bool trainable_;
	std::vector<std::pair<const Array2 *, ad::Var>> bound_;
};

/// Fully connected network with tanh hidden activations and a linear output.
struct Mlp {
	std::vector<Array2> weights; ///< layer l: fan_in x fan_out
	std::vector<Array2> biases;  ///< layer l: 1 x fan_out

	/// Hidden layers get N(0, 1/fan_in) weights; the output layer starts at
	/// zero so the network initially returns 0.
	static Mlp create(std::size_t input, std::size_t hidden, std::size_t hidden_layers, std::size_t output, Rng &rng) {
		Mlp net;
		std::size_t fan_in = input;
		for (std::size_t l = 0; l < hidden_layers; ++l) {
			net.weights.push_back(normal_array(fan_in, hidden, rng, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)))));
			net.biases.emplace_back(1, hidden);
			fan_in = hidden;
		}
		net.weights.emplace_back(fan_in, output);
		net.biases.emplace_back(1, output);
		return net;
	}

	std::size_t input_width() const {
		return weights.front().rows();
	}
	std::size_t output_width() const {
		return weights.back().cols();
	}

	ad::Var forward(ParamBinder &bind, ad::Var x) const {
		const std::size_t n = bind.tape().value(x).rows();
		ad::Var h = x;
		for (std::size_t l = 0; l < weights.size(); ++l) {
			h = ad::matmul(h, bind(weights[l])) + ad::broadcast_rows(bind(biases[l]), n);
			if (l + 1 < weights.size()) {
				h = ad::tanh(h);
			}
		}
		return h;
	}

	Array2 operator()(const Array2 &x) const {
		ad::Tape tape;
		ParamBinder bind(tape, false);
		return tape.value(forward(bind, tape.constant(x)));
	}
};

} // namespace fcpflow
