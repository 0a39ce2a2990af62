#pragma once

// Maximum-likelihood training: minimize the mean per-sample negative
// log-likelihood with clipped adaptive-moment steps over shuffled
// mini-batches.

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "fcpflow/data/dataset.hpp"
#include "fcpflow/flow/model.hpp"
#include "fcpflow/train/optimizer.hpp"

namespace fcpflow::train {

struct TrainConfig {
	std::size_t epochs = 100;
	std::size_t batch_size = 128;
	double learning_rate = 1e-3;
	double clip_norm = 10.0;
	std::uint64_t seed = 0;
	double alpha = 0.6;
	std::size_t blocks = 4;
	std::size_t hidden_width = 64;
	std::size_t hidden_layers = 2;
	/// Progress callback period in epochs; 0 disables it.
	std::size_t eval_every = 0;

	void check() const {
		if (batch_size < 2) {
			throw ConfigError("train: batch size must be >= 2 (normalization layers need batch statistics)");
		}
		if (!(learning_rate >= 0.0)) {
			throw ConfigError("train: learning rate must be non-negative");
		}
		if (!(clip_norm > 0.0)) {
			throw ConfigError("train: clip norm must be positive");
		}
	}

	FlowConfig flow_config(std::size_t profile_length, std::size_t condition_length) const {
		FlowConfig f;
		f.profile_length = profile_length;
		f.condition_length = condition_length;
		f.blocks = blocks;
		f.hidden_width = hidden_width;
		f.hidden_layers = hidden_layers;
		f.clamp.alpha = alpha;
		return f;
	}
};

struct EpochRecord {
	std::size_t epoch = 0;
	double mean_nll = 0.0; ///< nats per sample, averaged over the epoch's batches
	double wall_ms = 0.0;
};

struct TrainingLog {
	std::vector<EpochRecord> epochs;

	/// epoch,mean_nll,wall_ms
	void write_csv(std::ostream &out) const {
		out << "epoch,mean_nll,wall_ms\n";
		char buf[64];
		for (const EpochRecord &r : epochs) {
			std::snprintf(buf, sizeof(buf), "%.17g", r.mean_nll);
			out << r.epoch << ',' << buf << ',';
			std::snprintf(buf, sizeof(buf), "%.3f", r.wall_ms);
			out << buf << '\n';
		}
	}
};

struct FitResult {
	FlowModel model;
	TrainingLog log;
};

/// Raised when the loss or a gradient stops being finite. Carries the model
/// as it was at the end of the last completed epoch.
class TrainingAborted : public NumericError {
public:
	TrainingAborted(const std::string &what, std::size_t epoch, std::size_t batch, std::shared_ptr<const FlowModel> last)
	    : NumericError(what), epoch_(epoch), batch_(batch), last_finite_(std::move(last)) {
	}
	std::size_t epoch() const noexcept {
		return epoch_;
	}
	std::size_t batch() const noexcept {
		return batch_;
	}
	const std::shared_ptr<const FlowModel> &last_finite_model() const noexcept {
		return last_finite_;
	}

private:
	std::size_t epoch_;
	std::size_t batch_;
	std::shared_ptr<const FlowModel> last_finite_;
};

struct LossAndGradients {
	double loss = 0.0;               ///< mean per-sample NLL
	std::vector<Array2> gradients;   ///< aligned with model.parameters()
};

/// Mean NLL of a batch and its gradient with respect to every trainable
/// parameter. Uses the model's current mode; running statistics move only
/// when `update_statistics` is set.
inline LossAndGradients loss_and_gradients(FlowModel &model, const Array2 &x, const Array2 &c,
                                           bool update_statistics = false) {
	ad::Tape tape;
	ParamBinder bind(tape, true);
	const ad::Var ll = model.log_likelihood(bind, tape.constant(x), tape.constant(c), update_statistics);
	const ad::Var loss = ad::neg(ad::reduce_mean(ll));
	LossAndGradients out;
	out.loss = tape.value(loss)[0];
	if (!std::isfinite(out.loss)) {
		return out;
	}
	tape.backward(loss);
	std::map<const Array2 *, Array2> by_param;
	for (const auto &[param, var] : bind.bound()) {
		auto it = by_param.find(param);
		if (it == by_param.end()) {
			by_param.emplace(param, tape.grad(var));
		} else {
			it->second += tape.grad(var);
		}
	}
	for (const NamedParam &p : model.parameters()) {
		auto it = by_param.find(p.value);
		out.gradients.push_back(it == by_param.end() ? Array2(p.value->rows(), p.value->cols()) : it->second);
	}
	return out;
}

/// Mean per-sample NLL under the model's current mode (no gradients).
inline double mean_nll(const FlowModel &model, const Array2 &x, const Array2 &c) {
	const std::vector<double> ll = model.log_likelihood(x, c);
	double s = 0.0;
	for (double v : ll) {
		s -= v;
	}
	return s / static_cast<double>(ll.size());
}

/// Trains a fresh model on an already scaled dataset. The returned model is
/// in inference mode with running statistics recomputed over the full
/// training set.
inline FitResult fit(const data::ProfileDataset &train, const TrainConfig &config,
                     const std::function<void(const EpochRecord &)> &on_epoch = {}) {
	config.check();
	const std::size_t n = train.size();
	if (n < config.batch_size) {
		throw ContractError("train: dataset has " + std::to_string(n) + " rows, fewer than the batch size " +
		                    std::to_string(config.batch_size));
	}
	FitResult result{FlowModel(config.flow_config(train.profile_length(), train.condition_length()), config.seed), {}};
	FlowModel &model = result.model;
	model.set_mode(Mode::training);

	std::vector<Array2 *> params;
	for (NamedParam &p : model.parameters()) {
		params.push_back(p.value);
	}
	OptimizerState optimizer;
	Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), 0);
	auto last_finite = std::make_shared<const FlowModel>(model);

	for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
		const auto start = std::chrono::steady_clock::now();
		std::shuffle(order.begin(), order.end(), shuffle_rng);
		double loss_sum = 0.0;
		std::size_t batches = 0;
		for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
			const std::size_t count = std::min(config.batch_size, n - begin);
			if (count < 2) {
				break;
			}
			const std::span<const std::size_t> index(order.data() + begin, count);
			const Array2 x = gather_rows(train.profiles, index);
			const Array2 c = gather_rows(train.conditions, index);
			LossAndGradients lg;
			try {
				lg = loss_and_gradients(model, x, c, true);
				if (!std::isfinite(lg.loss)) {
					throw NumericError("loss is not finite");
				}
				optimizer_step(params, lg.gradients, optimizer, config.learning_rate, config.clip_norm);
			} catch (const NumericError &e) {
				throw TrainingAborted("train: epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches) +
				                          ": " + e.what(),
				                      epoch, batches, last_finite);
			}
			loss_sum += lg.loss;
			++batches;
		}
		const auto stop = std::chrono::steady_clock::now();
		EpochRecord record{epoch, loss_sum / static_cast<double>(batches),
		                   std::chrono::duration<double, std::milli>(stop - start).count()};
		result.log.epochs.push_back(record);
		last_finite = std::make_shared<const FlowModel>(model);
		if (on_epoch && config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs)) {
			on_epoch(record);
		}
	}

	model.recompute_statistics(train.profiles, train.conditions);
	model.set_mode(Mode::inference);
	return result;
}

} // namespace fcpflow::train
