#pragma once

// Reverse-mode automatic differentiation over Array2 values.
//
// A Tape records every operation in creation order, so reverse creation
// order is a valid topological order for the backward sweep. Values are
// computed eagerly when an op is recorded. One tape is meant to live for a
// single evaluation (one training step); it is not thread-safe.

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fcpflow/array.hpp"

namespace fcpflow::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
	Tape *tape = nullptr;
	std::size_t id = 0;
};

enum class Axis {
	all,  ///< reduce every entry to 1x1
	rows, ///< reduce across rows, result 1 x cols
	cols, ///< reduce across columns, result rows x 1
};

class Tape {
public:
	using BackwardFn = std::function<void(Tape &, const Array2 &)>;

	Tape() = default;
	Tape(const Tape &) = delete;
	Tape &operator=(const Tape &) = delete;

	/// Differentiable input (a parameter or data we want gradients for).
	Var leaf(Array2 value) {
		return push(std::move(value), true, {});
	}

	/// Non-differentiable input.
	Var constant(Array2 value) {
		return push(std::move(value), false, {});
	}

	const Array2 &value(Var v) const {
		return nodes_.at(v.id).value;
	}

	/// Accumulated gradient of v. All zeros when backward never reached it.
	Array2 grad(Var v) const {
		const Node &n = nodes_.at(v.id);
		if (!n.grad.same_shape(n.value)) {
			return Array2(n.value.rows(), n.value.cols());
		}
		return n.grad;
	}

	bool requires_grad(Var v) const {
		return nodes_.at(v.id).requires_grad;
	}

	std::size_t size() const noexcept {
		return nodes_.size();
	}

	/// Propagates d(output)/d(node) to every node that output depends on.
	/// Gradients add onto whatever previous backward calls left behind;
	/// call zero_grad() to start over.
	void backward(Var output) {
		const Array2 &out = value(output);
		if (out.rows() != 1 || out.cols() != 1) {
			throw ContractError("backward: output must be 1x1, got " + out.shape_string());
		}
		adjoint_.assign(output.id + 1, Array2());
		adjoint_[output.id] = Array2(1, 1, 1.0);
		for (std::size_t i = output.id + 1; i-- > 0;) {
			Node &n = nodes_[i];
			if (!n.requires_grad || !adjoint_[i].same_shape(n.value)) {
				continue;
			}
			if (!n.grad.same_shape(n.value)) {
				n.grad = Array2(n.value.rows(), n.value.cols());
			}
			n.grad += adjoint_[i];
			if (n.backward) {
				n.backward(*this, adjoint_[i]);
			}
			adjoint_[i] = Array2();
		}
		adjoint_.clear();
	}

	void zero_grad() {
		for (auto &n : nodes_) {
			n.grad = Array2();
		}
	}

	// Used by op implementations.
	Var push(Array2 value, bool requires_grad, BackwardFn backward) {
		nodes_.push_back(Node{std::move(value), Array2(), requires_grad, std::move(backward)});
		return Var{this, nodes_.size() - 1};
	}

	/// Adds g into the pending adjoint of v during a backward sweep.
	void accumulate(Var v, const Array2 &g) {
		if (!nodes_[v.id].requires_grad) {
			return;
		}
		Array2 &slot = adjoint_[v.id];
		if (slot.rows() == 0 && slot.cols() == 0) {
			slot = g;
		} else {
			slot += g;
		}
	}

	void accumulate(Var v, Array2 &&g) {
		if (!nodes_[v.id].requires_grad) {
			return;
		}
		Array2 &slot = adjoint_[v.id];
		if (slot.rows() == 0 && slot.cols() == 0) {
			slot = std::move(g);
		} else {
			slot += g;
		}
	}

private:
	struct Node {
		Array2 value;
		Array2 grad;
		bool requires_grad;
		BackwardFn backward;
	};

	std::deque<Node> nodes_; ///< deque: values stay put while ops push new nodes
	std::vector<Array2> adjoint_;
};

namespace detail {

inline Tape &same_tape(Var a, Var b) {
	if (a.tape == nullptr || a.tape != b.tape) {
		throw ContractError("autodiff: operands live on different tapes");
	}
	return *a.tape;
}

inline bool any_grad(Tape &t, std::initializer_list<Var> vs) {
	for (Var v : vs) {
		if (t.requires_grad(v)) {
			return true;
		}
	}
	return false;
}

inline bool is_scalar(const Array2 &a) {
	return a.rows() == 1 && a.cols() == 1;
}

/// Sum of all entries when the target is 1x1, otherwise g itself.
inline Array2 reduce_to(const Array2 &g, const Array2 &like) {
	if (g.same_shape(like)) {
		return g;
	}
	double s = 0.0;
	for (double v : g.values()) {
		s += v;
	}
	return Array2(1, 1, s);
}

enum class BinaryKind { add, sub, mul, div };

inline const char *binary_name(BinaryKind k) {
	switch (k) {
	case BinaryKind::add:
		return "add";
	case BinaryKind::sub:
		return "sub";
	case BinaryKind::mul:
		return "mul";
	case BinaryKind::div:
		return "div";
	}
	return "?";
}

inline Var binary(Var a, Var b, BinaryKind kind) {
	Tape &t = same_tape(a, b);
	const Array2 &av = t.value(a);
	const Array2 &bv = t.value(b);
	const bool a_scalar = is_scalar(av) && !is_scalar(bv);
	const bool b_scalar = is_scalar(bv) && !is_scalar(av);
	if (!av.same_shape(bv) && !a_scalar && !b_scalar) {
		throw DimensionError(std::string(binary_name(kind)) + ": shape " + av.shape_string() + " vs " +
		                     bv.shape_string());
	}
	const Array2 &shape = a_scalar ? bv : av;
	Array2 out(shape.rows(), shape.cols());
	const std::size_t n = out.size();
	auto ai = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
	auto bi = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
	for (std::size_t i = 0; i < n; ++i) {
		const double x = ai(i);
		const double y = bi(i);
		switch (kind) {
		case BinaryKind::add:
			out[i] = x + y;
			break;
		case BinaryKind::sub:
			out[i] = x - y;
			break;
		case BinaryKind::mul:
			out[i] = x * y;
			break;
		case BinaryKind::div:
			if (y == 0.0) {
				throw DomainError("div: zero denominator");
			}
			out[i] = x / y;
			break;
		}
	}
	if (!any_grad(t, {a, b})) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a, b, kind, a_scalar, b_scalar](Tape &tp, const Array2 &g) {
		const Array2 &av = tp.value(a);
		const Array2 &bv = tp.value(b);
		auto ai = [&](std::size_t i) { return a_scalar ? av[0] : av[i]; };
		auto bi = [&](std::size_t i) { return b_scalar ? bv[0] : bv[i]; };
		Array2 ga(g.rows(), g.cols());
		Array2 gb(g.rows(), g.cols());
		for (std::size_t i = 0; i < g.size(); ++i) {
			switch (kind) {
			case BinaryKind::add:
				ga[i] = g[i];
				gb[i] = g[i];
				break;
			case BinaryKind::sub:
				ga[i] = g[i];
				gb[i] = -g[i];
				break;
			case BinaryKind::mul:
				ga[i] = g[i] * bi(i);
				gb[i] = g[i] * ai(i);
				break;
			case BinaryKind::div: {
				const double y = bi(i);
				ga[i] = g[i] / y;
				gb[i] = -g[i] * ai(i) / (y * y);
				break;
			}
			}
		}
		tp.accumulate(a, reduce_to(ga, av));
		tp.accumulate(b, reduce_to(gb, bv));
	});
}

/// Pointwise op with derivative expressed in terms of input x and output y.
template <typename F, typename D>
Var unary(Var a, F f, D dfdx) {
	Tape &t = *a.tape;
	const Array2 &av = t.value(a);
	Array2 out(av.rows(), av.cols());
	for (std::size_t i = 0; i < av.size(); ++i) {
		out[i] = f(av[i]);
	}
	if (!t.requires_grad(a)) {
		return t.constant(std::move(out));
	}
	const std::size_t self = t.size();
	return t.push(std::move(out), true, [a, self, dfdx](Tape &tp, const Array2 &g) {
		const Array2 &x = tp.value(a);
		const Array2 &y = tp.value(Var{&tp, self});
		Array2 ga(g.rows(), g.cols());
		for (std::size_t i = 0; i < g.size(); ++i) {
			ga[i] = g[i] * dfdx(x[i], y[i]);
		}
		tp.accumulate(a, std::move(ga));
	});
}

} // namespace detail

inline Var add(Var a, Var b) {
	return detail::binary(a, b, detail::BinaryKind::add);
}
inline Var sub(Var a, Var b) {
	return detail::binary(a, b, detail::BinaryKind::sub);
}
inline Var mul(Var a, Var b) {
	return detail::binary(a, b, detail::BinaryKind::mul);
}
inline Var div(Var a, Var b) {
	return detail::binary(a, b, detail::BinaryKind::div);
}

inline Var operator+(Var a, Var b) {
	return add(a, b);
}
inline Var operator-(Var a, Var b) {
	return sub(a, b);
}
inline Var operator*(Var a, Var b) {
	return mul(a, b);
}
inline Var operator/(Var a, Var b) {
	return div(a, b);
}

inline Var neg(Var a) {
	return detail::unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

inline Var scale(Var a, double k) {
	return detail::unary(a, [k](double x) { return k * x; }, [k](double, double) { return k; });
}

inline Var add_scalar(Var a, double k) {
	return detail::unary(a, [k](double x) { return x + k; }, [](double, double) { return 1.0; });
}

inline Var exp(Var a) {
	return detail::unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Var log(Var a) {
	for (double v : a.tape->value(a).values()) {
		if (!(v > 0.0)) {
			throw DomainError("log: operand must be strictly positive, got " + std::to_string(v));
		}
	}
	return detail::unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Var atan(Var a) {
	return detail::unary(a, [](double x) { return std::atan(x); },
	                     [](double x, double) { return 1.0 / (1.0 + x * x); });
}

inline Var tanh(Var a) {
	return detail::unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var square(Var a) {
	return detail::unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Var sqrt(Var a) {
	for (double v : a.tape->value(a).values()) {
		if (v < 0.0) {
			throw DomainError("sqrt: negative operand " + std::to_string(v));
		}
	}
	return detail::unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

inline Var matmul(Var a, Var b) {
	Tape &t = detail::same_tape(a, b);
	Array2 out = fcpflow::matmul(t.value(a), t.value(b));
	if (!detail::any_grad(t, {a, b})) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a, b](Tape &tp, const Array2 &g) {
		if (tp.requires_grad(a)) {
			tp.accumulate(a, matmul_nt(g, tp.value(b)));
		}
		if (tp.requires_grad(b)) {
			tp.accumulate(b, matmul_tn(tp.value(a), g));
		}
	});
}

inline Var transpose(Var a) {
	Tape &t = *a.tape;
	Array2 out = fcpflow::transpose(t.value(a));
	if (!t.requires_grad(a)) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true,
	              [a](Tape &tp, const Array2 &g) { tp.accumulate(a, fcpflow::transpose(g)); });
}

/// Columns of a picked by index (repeats allowed). Gradients scatter-add back.
inline Var gather_cols(Var a, std::vector<std::size_t> index) {
	Tape &t = *a.tape;
	const Array2 &av = t.value(a);
	for (std::size_t j : index) {
		if (j >= av.cols()) {
			throw DimensionError("gather_cols: column " + std::to_string(j) + " out of range for " +
			                     av.shape_string());
		}
	}
	Array2 out(av.rows(), index.size());
	for (std::size_t r = 0; r < av.rows(); ++r) {
		for (std::size_t j = 0; j < index.size(); ++j) {
			out(r, j) = av(r, index[j]);
		}
	}
	if (!t.requires_grad(a)) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a, index = std::move(index)](Tape &tp, const Array2 &g) {
		const Array2 &av = tp.value(a);
		Array2 ga(av.rows(), av.cols());
		for (std::size_t r = 0; r < g.rows(); ++r) {
			for (std::size_t j = 0; j < index.size(); ++j) {
				ga(r, index[j]) += g(r, j);
			}
		}
		tp.accumulate(a, std::move(ga));
	});
}

inline Var concat_cols(Var a, Var b) {
	Tape &t = detail::same_tape(a, b);
	Array2 out = hconcat(t.value(a), t.value(b));
	if (!detail::any_grad(t, {a, b})) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a, b](Tape &tp, const Array2 &g) {
		const std::size_t ca = tp.value(a).cols();
		const std::size_t cb = tp.value(b).cols();
		Array2 ga(g.rows(), ca);
		Array2 gb(g.rows(), cb);
		for (std::size_t r = 0; r < g.rows(); ++r) {
			for (std::size_t j = 0; j < ca; ++j) {
				ga(r, j) = g(r, j);
			}
			for (std::size_t j = 0; j < cb; ++j) {
				gb(r, j) = g(r, ca + j);
			}
		}
		tp.accumulate(a, std::move(ga));
		tp.accumulate(b, std::move(gb));
	});
}

/// Column indices 0,2,4,... (ceil(n/2) entries) and 1,3,5,... (floor(n/2)).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> even_odd_index(std::size_t n) {
	std::vector<std::size_t> even;
	std::vector<std::size_t> odd;
	for (std::size_t j = 0; j < n; ++j) {
		(j % 2 == 0 ? even : odd).push_back(j);
	}
	return {even, odd};
}

/// Splits columns into (even-indexed, odd-indexed). With an odd column count
/// the first part holds the extra column.
inline std::pair<Var, Var> split_even_odd(Var a) {
	const std::size_t n = a.tape->value(a).cols();
	if (n < 2) {
		throw DimensionError("split_even_odd: need at least 2 columns, got " + std::to_string(n));
	}
	auto [even, odd] = even_odd_index(n);
	return {gather_cols(a, std::move(even)), gather_cols(a, std::move(odd))};
}

/// Inverse of split_even_odd: columns of a go to even positions, columns of b
/// to odd positions. Requires a.cols() == b.cols() or a.cols() == b.cols() + 1.
inline Var interleave(Var a, Var b) {
	Tape &t = detail::same_tape(a, b);
	const std::size_t na = t.value(a).cols();
	const std::size_t nb = t.value(b).cols();
	if (na != nb && na != nb + 1) {
		throw DimensionError("interleave: column counts " + std::to_string(na) + " and " + std::to_string(nb) +
		                     " cannot be interleaved");
	}
	std::vector<std::size_t> index(na + nb);
	for (std::size_t j = 0; j < na + nb; ++j) {
		index[j] = (j % 2 == 0) ? j / 2 : na + j / 2;
	}
	return gather_cols(concat_cols(a, b), std::move(index));
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t count) {
	std::vector<std::size_t> index(count);
	std::iota(index.begin(), index.end(), begin);
	return gather_cols(a, std::move(index));
}

/// Repeats a 1 x n row vector m times.
inline Var broadcast_rows(Var a, std::size_t m) {
	Tape &t = *a.tape;
	const Array2 &av = t.value(a);
	if (av.rows() != 1) {
		throw DimensionError("broadcast_rows: expected a row vector, got " + av.shape_string());
	}
	Array2 out(m, av.cols());
	for (std::size_t r = 0; r < m; ++r) {
		std::copy(av.values().begin(), av.values().end(), out.row(r).begin());
	}
	if (!t.requires_grad(a)) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a](Tape &tp, const Array2 &g) {
		Array2 ga(1, g.cols());
		for (std::size_t r = 0; r < g.rows(); ++r) {
			for (std::size_t j = 0; j < g.cols(); ++j) {
				ga(0, j) += g(r, j);
			}
		}
		tp.accumulate(a, std::move(ga));
	});
}

inline Var reduce_sum(Var a, Axis axis = Axis::all) {
	Tape &t = *a.tape;
	const Array2 &av = t.value(a);
	Array2 out;
	switch (axis) {
	case Axis::all: {
		double s = 0.0;
		for (double v : av.values()) {
			s += v;
		}
		out = Array2(1, 1, s);
		break;
	}
	case Axis::rows:
		out = Array2(1, av.cols());
		for (std::size_t r = 0; r < av.rows(); ++r) {
			for (std::size_t j = 0; j < av.cols(); ++j) {
				out(0, j) += av(r, j);
			}
		}
		break;
	case Axis::cols:
		out = Array2(av.rows(), 1);
		for (std::size_t r = 0; r < av.rows(); ++r) {
			for (std::size_t j = 0; j < av.cols(); ++j) {
				out(r, 0) += av(r, j);
			}
		}
		break;
	}
	if (!t.requires_grad(a)) {
		return t.constant(std::move(out));
	}
	return t.push(std::move(out), true, [a, axis](Tape &tp, const Array2 &g) {
		const Array2 &av = tp.value(a);
		Array2 ga(av.rows(), av.cols());
		for (std::size_t r = 0; r < av.rows(); ++r) {
			for (std::size_t j = 0; j < av.cols(); ++j) {
				ga(r, j) = axis == Axis::all ? g[0] : axis == Axis::rows ? g(0, j) : g(r, 0);
			}
		}
		tp.accumulate(a, std::move(ga));
	});
}

inline Var reduce_mean(Var a, Axis axis = Axis::all) {
	const Array2 &av = a.tape->value(a);
	const std::size_t count = axis == Axis::all ? av.size() : axis == Axis::rows ? av.rows() : av.cols();
	if (count == 0) {
		throw ContractError("reduce_mean: empty reduction");
	}
	return scale(reduce_sum(a, axis), 1.0 / static_cast<double>(count));
}

/// Population (biased) variance along the axis.
inline Var reduce_var(Var a, Axis axis = Axis::all) {
	const Array2 &av = a.tape->value(a);
	const Var mean = reduce_mean(a, axis);
	Var centered;
	switch (axis) {
	case Axis::all:
		centered = sub(a, mean);
		break;
	case Axis::rows:
		centered = sub(a, broadcast_rows(mean, av.rows()));
		break;
	case Axis::cols:
		centered = sub(a, transpose(broadcast_rows(transpose(mean), av.cols())));
		break;
	}
	return reduce_mean(square(centered), axis);
}

/// Maximum over parameter entries of
///   |analytic - central difference| / max(1, |central difference|).
/// `f` reads the current contents of `params`; entries are perturbed in place
/// and restored.
inline double finite_diff_check(const std::function<double()> &f, std::span<Array2 *const> params,
                                std::span<const Array2> analytic, double step) {
	if (!(step > 0.0)) {
		throw ContractError("finite_diff_check: step must be positive");
	}
	if (params.size() != analytic.size()) {
		throw DimensionError("finite_diff_check: parameter/gradient count mismatch");
	}
	double worst = 0.0;
	for (std::size_t p = 0; p < params.size(); ++p) {
		Array2 &theta = *params[p];
		if (!theta.same_shape(analytic[p])) {
			throw DimensionError("finite_diff_check: gradient shape mismatch for parameter " + std::to_string(p));
		}
		for (std::size_t i = 0; i < theta.size(); ++i) {
			const double saved = theta[i];
			theta[i] = saved + step;
			const double up = f();
			theta[i] = saved - step;
			const double down = f();
			theta[i] = saved;
			if (!std::isfinite(up) || !std::isfinite(down)) {
				throw NumericError("finite_diff_check: non-finite function value at parameter " + std::to_string(p) +
				                   " entry " + std::to_string(i));
			}
			const double numeric = (up - down) / (2.0 * step);
			worst = std::max(worst, std::abs(analytic[p][i] - numeric) / std::max(1.0, std::abs(numeric)));
		}
	}
	return worst;
}

/// Convenience form: builds the graph with `f`, takes analytic gradients
/// by backward(), and compares against central differences.
inline double finite_diff_check(const std::function<Var(Tape &, std::span<const Var>)> &f,
                                std::vector<Array2> &theta, double step) {
	std::vector<Array2> analytic;
	{
		Tape tape;
		std::vector<Var> leaves;
		for (const auto &p : theta) {
			leaves.push_back(tape.leaf(p));
		}
		tape.backward(f(tape, leaves));
		for (Var v : leaves) {
			analytic.push_back(tape.grad(v));
		}
	}
	auto value = [&]() {
		Tape tape;
		std::vector<Var> leaves;
		for (const auto &p : theta) {
			leaves.push_back(tape.constant(p));
		}
		return tape.value(f(tape, leaves))[0];
	};
	std::vector<Array2 *> ptrs;
	for (auto &p : theta) {
		ptrs.push_back(&p);
	}
	return finite_diff_check(value, ptrs, analytic, step);
}

} // namespace fcpflow::ad
