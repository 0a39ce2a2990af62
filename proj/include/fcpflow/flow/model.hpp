#pragma once

// FCPFlow: a stack of blocks, each normalization -> linear -> coupling in
// the normalizing (data -> latent) direction. Generation runs the blocks in
// reverse with each layer inverted.
//
//   log p(x | c) = log N(z0; 0, I) + sum over blocks and layers of log|det|

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fcpflow/data/scaler.hpp"
#include "fcpflow/flow/coupling.hpp"
#include "fcpflow/flow/linear.hpp"
#include "fcpflow/flow/normalization.hpp"

namespace fcpflow {

struct FlowConfig {
	std::size_t profile_length = 24;  ///< T
	std::size_t condition_length = 0; ///< B
	std::size_t blocks = 4;           ///< K
	std::size_t hidden_width = 64;
	std::size_t hidden_layers = 2;
	ClampConfig clamp;
	double eps = 1e-6;
	double momentum = 0.1;

	void check() const {
		if (profile_length < 2) {
			throw ConfigError("flow: profile length must be >= 2");
		}
		if (blocks == 0) {
			throw ConfigError("flow: need at least one block");
		}
		if (hidden_width == 0) {
			throw ConfigError("flow: hidden width must be positive");
		}
		if (!(eps > 0.0)) {
			throw ConfigError("flow: eps must be positive");
		}
		if (!(momentum > 0.0 && momentum < 1.0)) {
			throw ConfigError("flow: momentum must lie in (0, 1)");
		}
		clamp.check();
	}
};

struct FlowBlock {
	NormState norm;
	LinearFactor linear;
	CouplingNets coupling;
};

struct NamedParam {
	std::string name;
	Array2 *value;
};

/// Per-layer log-determinants of one normalizing pass, for inspection.
struct LayerLogdets {
	std::vector<double> norm;
	std::vector<double> linear;
	std::vector<double> coupling;
};

class FlowModel {
public:
	FlowModel() = default;

	/// Each block starts as normalization -> random rotation -> swap.
	FlowModel(FlowConfig config, std::uint64_t seed) : config_(std::move(config)) {
		config_.check();
		Rng rng(seed);
		const std::size_t t = config_.profile_length;
		for (std::size_t k = 0; k < config_.blocks; ++k) {
			FlowBlock block;
			block.norm = NormState::empty(t, config_.eps, config_.momentum);
			block.linear = LinearFactor::random_rotation(t, rng);
			block.coupling =
			    CouplingNets::create(t, config_.condition_length, config_.hidden_width, config_.hidden_layers, rng);
			blocks_.push_back(std::move(block));
		}
	}

	const FlowConfig &config() const noexcept {
		return config_;
	}
	std::size_t profile_length() const noexcept {
		return config_.profile_length;
	}
	std::size_t condition_length() const noexcept {
		return config_.condition_length;
	}
	std::vector<FlowBlock> &blocks() noexcept {
		return blocks_;
	}
	const std::vector<FlowBlock> &blocks() const noexcept {
		return blocks_;
	}
	Mode mode() const noexcept {
		return mode_;
	}
	void set_mode(Mode m) noexcept {
		mode_ = m;
	}

	/// Scaling applied to the data the model was trained on, if any.
	std::optional<data::Scaler> scaler;

	/// Trainable parameters in a fixed order. Running statistics are not
	/// included.
	std::vector<NamedParam> parameters() {
		std::vector<NamedParam> out;
		for (std::size_t k = 0; k < blocks_.size(); ++k) {
			const std::string prefix = "block" + std::to_string(k) + ".";
			FlowBlock &b = blocks_[k];
			out.push_back({prefix + "linear.lower", &b.linear.lower});
			out.push_back({prefix + "linear.upper", &b.linear.upper});
			out.push_back({prefix + "linear.log_diag", &b.linear.log_diag});
			const std::pair<const char *, Mlp *> nets[] = {
			    {"s1", &b.coupling.s1}, {"t1", &b.coupling.t1}, {"s2", &b.coupling.s2}, {"t2", &b.coupling.t2}};
			for (const auto &[name, net] : nets) {
				for (std::size_t l = 0; l < net->weights.size(); ++l) {
					out.push_back({prefix + "coupling." + name + ".w" + std::to_string(l), &net->weights[l]});
					out.push_back({prefix + "coupling." + name + ".b" + std::to_string(l), &net->biases[l]});
				}
			}
		}
		return out;
	}

	std::size_t parameter_count() {
		std::size_t n = 0;
		for (const auto &p : parameters()) {
			n += p.value->size();
		}
		return n;
	}

	/// Records the normalizing pass on a tape. Uses batch statistics in
	/// training mode; running statistics are only touched when
	/// `update_statistics` is set. `logdets`, when given, receives the
	/// per-layer log-determinants of every block.
	TapeFlow normalize(ParamBinder &bind, ad::Var x, ad::Var c, bool update_statistics = false,
	                   std::vector<LayerLogdets> *logdets = nullptr) {
		return normalize_impl(bind, x, c, update_statistics ? this : nullptr, logdets);
	}

	TapeFlow normalize(ParamBinder &bind, ad::Var x, ad::Var c) const {
		return const_cast<FlowModel *>(this)->normalize_impl(bind, x, c, nullptr, nullptr);
	}

	FlowResult normalize(const Array2 &x, const Array2 &c) const {
		ad::Tape tape;
		ParamBinder bind(tape, false);
		const TapeFlow out = normalize(bind, tape.constant(x), tape.constant(c));
		return {tape.value(out.z), detail::column_vector(tape.value(out.logdet))};
	}

	/// Per-row log-likelihood in nats, recorded on a tape (batch x 1).
	ad::Var log_likelihood(ParamBinder &bind, ad::Var x, ad::Var c, bool update_statistics = false) {
		const TapeFlow flow = normalize(bind, x, c, update_statistics);
		return log_likelihood_from(flow);
	}

	std::vector<double> log_likelihood(const Array2 &x, const Array2 &c) const {
		ad::Tape tape;
		ParamBinder bind(tape, false);
		const TapeFlow flow = normalize(bind, tape.constant(x), tape.constant(c));
		const Array2 &ll = tape.value(log_likelihood_from(flow));
		for (std::size_t r = 0; r < ll.size(); ++r) {
			if (!std::isfinite(ll[r])) {
				throw NumericError("log_likelihood: non-finite value for row " + std::to_string(r));
			}
		}
		return detail::column_vector(ll);
	}

	/// Latent -> data. Requires inference mode.
	Array2 generate(const Array2 &z0, const Array2 &c) const {
		if (mode_ != Mode::inference) {
			throw StateError("generate: model is in training mode; batch statistics are undefined at sampling time");
		}
		check_inputs(z0, c);
		Array2 x = z0;
		for (std::size_t k = blocks_.size(); k-- > 0;) {
			const FlowBlock &b = blocks_[k];
			try {
				x = coupling_generate(x, c, b.coupling, config_.clamp);
				x = linear_generate(x, b.linear);
				x = norm_generate(x, b.norm);
			} catch (const NumericError &e) {
				throw NumericError("block " + std::to_string(k) + ": " + e.what());
			} catch (const StateError &e) {
				throw StateError("block " + std::to_string(k) + ": " + e.what());
			}
		}
		return x;
	}

	/// Draws `count` latent rows from N(0, I) and generates. `c` holds either
	/// one row (replicated) or `count` rows.
	Array2 sample(const Array2 &c, std::size_t count, std::uint64_t seed) const {
		Rng rng(seed);
		const Array2 z0 = normal_array(count, config_.profile_length, rng);
		return generate(z0, replicate_condition(c, count));
	}

	Array2 replicate_condition(const Array2 &c, std::size_t count) const {
		if (c.cols() != config_.condition_length) {
			throw DimensionError("condition has " + std::to_string(c.cols()) + " columns, model expects " +
			                     std::to_string(config_.condition_length));
		}
		if (c.rows() == count) {
			return c;
		}
		if (c.rows() != 1 && !(c.rows() == 0 && config_.condition_length == 0)) {
			throw DimensionError("condition must have 1 or " + std::to_string(count) + " rows, got " +
			                     std::to_string(c.rows()));
		}
		Array2 out(count, c.cols());
		for (std::size_t r = 0; r < count; ++r) {
			for (std::size_t j = 0; j < c.cols(); ++j) {
				out(r, j) = c(0, j);
			}
		}
		return out;
	}

	/// Replaces every block's running statistics with the exact statistics
	/// of its input over (x, c), block by block in inference mode.
	void recompute_statistics(const Array2 &x, const Array2 &c) {
		check_inputs(x, c);
		if (x.rows() < 2) {
			throw ContractError("recompute_statistics: need at least 2 rows");
		}
		const Mode saved = mode_;
		Array2 h = x;
		for (FlowBlock &b : blocks_) {
			std::vector<double> mean(h.cols(), 0.0);
			std::vector<double> sd(h.cols(), 0.0);
			for (std::size_t j = 0; j < h.cols(); ++j) {
				for (std::size_t r = 0; r < h.rows(); ++r) {
					mean[j] += h(r, j);
				}
				mean[j] /= static_cast<double>(h.rows());
				for (std::size_t r = 0; r < h.rows(); ++r) {
					sd[j] += (h(r, j) - mean[j]) * (h(r, j) - mean[j]);
				}
				sd[j] = std::sqrt(sd[j] / static_cast<double>(h.rows()));
			}
			b.norm.gamma = mean;
			b.norm.beta = sd;
			b.norm.populated = true;

			ad::Tape tape;
			ParamBinder bind(tape, false);
			const TapeFlow n = norm_normalize(tape.constant(h), b.norm, Mode::inference);
			const TapeFlow l = linear_normalize(bind, n.z, b.linear);
			const TapeFlow cpl = coupling_normalize(bind, l.z, tape.constant(c), b.coupling, config_.clamp);
			h = tape.value(cpl.z);
		}
		mode_ = saved;
	}

private:
	static ad::Var log_likelihood_from(const TapeFlow &flow) {
		ad::Tape &tape = *flow.z.tape;
		const double t = static_cast<double>(tape.value(flow.z).cols());
		const ad::Var base = ad::add_scalar(ad::scale(ad::reduce_sum(ad::square(flow.z), ad::Axis::cols), -0.5),
		                                    -0.5 * t * std::log(2.0 * std::numbers::pi));
		return base + flow.logdet;
	}

	void check_inputs(const Array2 &x, const Array2 &c) const {
		if (x.cols() != config_.profile_length) {
			throw DimensionError("flow: data has " + std::to_string(x.cols()) + " columns, model expects T = " +
			                     std::to_string(config_.profile_length));
		}
		if (c.cols() != config_.condition_length) {
			throw DimensionError("flow: condition has " + std::to_string(c.cols()) + " columns, model expects B = " +
			                     std::to_string(config_.condition_length));
		}
		if (c.rows() != x.rows()) {
			throw DimensionError("flow: condition rows " + std::to_string(c.rows()) + " != data rows " +
			                     std::to_string(x.rows()));
		}
	}

	TapeFlow normalize_impl(ParamBinder &bind, ad::Var x, ad::Var c, FlowModel *update,
	                        std::vector<LayerLogdets> *logdets) {
		ad::Tape &tape = bind.tape();
		check_inputs(tape.value(x), tape.value(c));
		ad::Var h = x;
		ad::Var total;
		bool first = true;
		if (logdets != nullptr) {
			logdets->clear();
		}
		for (std::size_t k = 0; k < blocks_.size(); ++k) {
			FlowBlock &b = blocks_[k];
			try {
				const TapeFlow n = norm_normalize(h, b.norm, mode_, update != nullptr ? &b.norm : nullptr);
				const TapeFlow l = linear_normalize(bind, n.z, b.linear);
				const TapeFlow cpl = coupling_normalize(bind, l.z, c, b.coupling, config_.clamp);
				const ad::Var block_logdet = n.logdet + l.logdet + cpl.logdet;
				total = first ? block_logdet : total + block_logdet;
				first = false;
				h = cpl.z;
				if (logdets != nullptr) {
					logdets->push_back({detail::column_vector(tape.value(n.logdet)),
					                    detail::column_vector(tape.value(l.logdet)),
					                    detail::column_vector(tape.value(cpl.logdet))});
				}
			} catch (const NumericError &e) {
				throw NumericError("block " + std::to_string(k) + ": " + e.what());
			} catch (const StateError &e) {
				throw StateError("block " + std::to_string(k) + ": " + e.what());
			} catch (const ContractError &e) {
				throw ContractError("block " + std::to_string(k) + ": " + e.what());
			}
		}
		return {h, total};
	}

	FlowConfig config_;
	std::vector<FlowBlock> blocks_;
	Mode mode_ = Mode::training;
};

/// Overwrites every parameter and running statistic with random values so
/// that no layer is close to the identity. Leaves the model in inference
/// mode. Used by tests and diagnostics.
inline void randomize(FlowModel &model, std::uint64_t seed, double weight_scale = 0.5) {
	Rng rng(seed);
	std::normal_distribution<double> normal(0.0, 1.0);
	std::uniform_real_distribution<double> uniform(0.6, 1.6);
	for (FlowBlock &b : model.blocks()) {
		for (std::size_t i = 0; i < b.norm.width(); ++i) {
			b.norm.gamma[i] = 0.5 * normal(rng);
			b.norm.beta[i] = uniform(rng);
		}
		b.norm.populated = true;
		for (double &v : b.linear.lower.values()) {
			v = 0.3 * normal(rng);
		}
		for (double &v : b.linear.upper.values()) {
			v = 0.3 * normal(rng);
		}
		for (double &v : b.linear.log_diag.values()) {
			v = 0.2 * normal(rng);
		}
	}
	for (NamedParam &p : model.parameters()) {
		if (p.name.find("coupling") == std::string::npos) {
			continue;
		}
		const double fan_in = static_cast<double>(std::max<std::size_t>(p.value->rows(), 1));
		for (double &v : p.value->values()) {
			v = weight_scale * normal(rng) / std::sqrt(fan_in);
		}
	}
	model.set_mode(Mode::inference);
}

/// Convenience wrappers with the operation names used across the project.
inline FlowResult model_normalize(const Array2 &x, const Array2 &c, const FlowModel &model) {
	return model.normalize(x, c);
}

inline Array2 model_generate(const Array2 &z0, const Array2 &c, const FlowModel &model) {
	return model.generate(z0, c);
}

} // namespace fcpflow
