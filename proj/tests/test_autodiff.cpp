#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fcpflow/autodiff.hpp"
#include "fcpflow/linalg.hpp"

using fcpflow::Array2;
using fcpflow::Rng;
namespace ad = fcpflow::ad;

namespace {

Array2 positive_array(std::size_t r, std::size_t c, Rng &rng) {
	return fcpflow::uniform_array(r, c, rng, 0.5, 2.0);
}

/// Weighted sum with fixed random weights so every output entry matters.
ad::Var random_reduction(ad::Var v, Rng &rng) {
	const Array2 &value = v.tape->value(v);
	return ad::reduce_sum(v * v.tape->constant(fcpflow::normal_array(value.rows(), value.cols(), rng)));
}

} // namespace

TEST(Autodiff, MatmulValues) {
	ad::Tape t;
	const Array2 m{{1, 2}, {3, 4}};
	EXPECT_EQ(t.value(ad::matmul(t.constant(Array2::identity(2)), t.constant(m))), m);
	const ad::Var p = ad::matmul(t.constant(Array2{{1, 2}}), t.constant(Array2{{3}, {4}}));
	EXPECT_EQ(t.value(p), (Array2{{11}}));
}

TEST(Autodiff, MatmulShapeMismatch) {
	ad::Tape t;
	EXPECT_THROW(ad::matmul(t.constant(Array2(2, 3)), t.constant(Array2(2, 3))), fcpflow::DimensionError);
}

TEST(Autodiff, MatmulGradientMatchesFiniteDifferences) {
	Rng rng(1);
	std::vector<Array2> theta{fcpflow::normal_array(3, 3, rng), fcpflow::normal_array(3, 3, rng)};
	const double err = ad::finite_diff_check(
	    [](ad::Tape &, std::span<const ad::Var> p) { return ad::reduce_sum(ad::matmul(p[0], p[1])); }, theta, 1e-5);
	EXPECT_LE(err, 1e-6);
}

TEST(Autodiff, PointwiseValues) {
	ad::Tape t;
	EXPECT_DOUBLE_EQ(t.value(ad::exp(t.constant(Array2{{0.0}})))[0], 1.0);
	EXPECT_DOUBLE_EQ(t.value(ad::atan(t.constant(Array2{{1.0}})))[0], std::numbers::pi / 4.0);
	const ad::Var x = t.leaf(Array2{{2.0}});
	t.backward(ad::log(x));
	EXPECT_NEAR(t.grad(x)[0], 0.5, 1e-8);
}

TEST(Autodiff, DomainErrorsNameTheOperation) {
	ad::Tape t;
	try {
		ad::log(t.constant(Array2{{0.0}}));
		FAIL() << "expected DomainError";
	} catch (const fcpflow::DomainError &e) {
		EXPECT_NE(std::string(e.what()).find("log"), std::string::npos);
	}
	try {
		ad::div(t.constant(Array2{{1.0}}), t.constant(Array2{{0.0}}));
		FAIL() << "expected DomainError";
	} catch (const fcpflow::DomainError &e) {
		EXPECT_NE(std::string(e.what()).find("div"), std::string::npos);
	}
}

TEST(Autodiff, SplitEvenOdd) {
	ad::Tape t;
	auto [a, b] = ad::split_even_odd(t.constant(Array2{{10, 11, 12, 13}}));
	EXPECT_EQ(t.value(a), (Array2{{10, 12}}));
	EXPECT_EQ(t.value(b), (Array2{{11, 13}}));

	auto [c, d] = ad::split_even_odd(t.constant(Array2{{0, 1, 2, 3, 4}}));
	EXPECT_EQ(t.value(c), (Array2{{0, 2, 4}}));
	EXPECT_EQ(t.value(d), (Array2{{1, 3}}));

	EXPECT_THROW(ad::split_even_odd(t.constant(Array2{{1.0}})), fcpflow::DimensionError);
}

TEST(Autodiff, InterleaveInvertsSplitForAllWidths) {
	Rng rng(7);
	for (std::size_t n = 2; n <= 17; ++n) {
		ad::Tape t;
		const Array2 v = fcpflow::normal_array(3, n, rng);
		auto [a, b] = ad::split_even_odd(t.constant(v));
		EXPECT_EQ(t.value(ad::interleave(a, b)), v) << "n = " << n;
	}
}

TEST(Autodiff, BackwardBasics) {
	ad::Tape t;
	const ad::Var x = t.leaf(Array2{{1, 2}, {3, 4}});
	t.backward(ad::reduce_sum(ad::scale(x, 2.0)));
	EXPECT_EQ(t.grad(x), (Array2{{2, 2}, {2, 2}}));

	ad::Tape t2;
	const ad::Var y = t2.leaf(Array2{{1, 2}});
	const ad::Var k = t2.constant(Array2{{5.0}});
	t2.backward(k);
	EXPECT_EQ(t2.grad(y), (Array2{{0, 0}}));
}

TEST(Autodiff, BackwardRequiresScalar) {
	ad::Tape t;
	const ad::Var x = t.leaf(Array2{{1, 2}});
	EXPECT_THROW(t.backward(x), fcpflow::ContractError);
}

TEST(Autodiff, RepeatedBackwardAccumulatesUntilReset) {
	ad::Tape t;
	const ad::Var x = t.leaf(Array2{{3.0}});
	const ad::Var y = ad::square(ad::tanh(x));
	t.backward(y);
	const double once = t.grad(x)[0];
	t.backward(y);
	EXPECT_DOUBLE_EQ(t.grad(x)[0], 2.0 * once);
	t.zero_grad();
	t.backward(y);
	EXPECT_DOUBLE_EQ(t.grad(x)[0], once);
}

TEST(Autodiff, BackwardIsLinear) {
	Rng rng(11);
	const Array2 p = fcpflow::normal_array(3, 4, rng);
	auto f = [](ad::Var x) { return ad::reduce_sum(ad::tanh(x) * x); };
	auto g = [](ad::Var x) { return ad::reduce_mean(ad::exp(ad::scale(x, 0.3))); };

	ad::Tape tf;
	const ad::Var xf = tf.leaf(p);
	tf.backward(f(xf));
	ad::Tape tg;
	const ad::Var xg = tg.leaf(p);
	tg.backward(g(xg));
	ad::Tape ts;
	const ad::Var xs = ts.leaf(p);
	ts.backward(f(xs) + g(xs));

	Array2 sum = tf.grad(xf);
	sum += tg.grad(xg);
	EXPECT_LE(fcpflow::max_abs_diff(sum, ts.grad(xs)), 1e-14);
}

// Every differentiable op against central differences, 20 random shapes.
TEST(Autodiff, EveryOpMatchesFiniteDifferences) {
	using Op = std::function<ad::Var(ad::Tape &, std::span<const ad::Var>, Rng &)>;
	struct Case {
		const char *name;
		int operands;
		bool positive;
		Op op;
	};
	const std::vector<Case> cases = {
	    {"add", 2, false, [](ad::Tape &, auto p, Rng &) { return p[0] + p[1]; }},
	    {"sub", 2, false, [](ad::Tape &, auto p, Rng &) { return p[0] - p[1]; }},
	    {"mul", 2, false, [](ad::Tape &, auto p, Rng &) { return p[0] * p[1]; }},
	    {"div", 2, true, [](ad::Tape &, auto p, Rng &) { return p[0] / p[1]; }},
	    {"exp", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::exp(p[0]); }},
	    {"log", 1, true, [](ad::Tape &, auto p, Rng &) { return ad::log(p[0]); }},
	    {"atan", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::atan(p[0]); }},
	    {"tanh", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::tanh(p[0]); }},
	    {"neg", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::neg(p[0]); }},
	    {"scale", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::scale(p[0], -1.7); }},
	    {"square", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::square(p[0]); }},
	    {"sqrt", 1, true, [](ad::Tape &, auto p, Rng &) { return ad::sqrt(p[0]); }},
	    {"transpose", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::transpose(p[0]); }},
	    {"concat", 2, false, [](ad::Tape &, auto p, Rng &) { return ad::concat_cols(p[0], p[1]); }},
	    {"split", 1, false,
	     [](ad::Tape &, auto p, Rng &) {
		     auto [a, b] = ad::split_even_odd(p[0]);
		     return ad::concat_cols(ad::scale(a, 2.0), b);
	     }},
	    {"slice", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::slice_cols(p[0], 1, 1); }},
	    {"sum_rows", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_sum(p[0], ad::Axis::rows); }},
	    {"sum_cols", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_sum(p[0], ad::Axis::cols); }},
	    {"mean", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_mean(p[0]); }},
	    {"var_all", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_var(p[0]); }},
	    {"var_rows", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_var(p[0], ad::Axis::rows); }},
	    {"var_cols", 1, false, [](ad::Tape &, auto p, Rng &) { return ad::reduce_var(p[0], ad::Axis::cols); }},
	    {"broadcast", 1, false,
	     [](ad::Tape &, auto p, Rng &) { return ad::broadcast_rows(ad::reduce_sum(p[0], ad::Axis::rows), 3); }},
	    {"scalar_mul", 2, false,
	     [](ad::Tape &, auto p, Rng &) { return p[0] * ad::reduce_sum(p[1]); }},
	};

	std::size_t checks = 0;
	for (const Case &c : cases) {
		for (std::uint64_t seed = 0; seed < 20; ++seed) {
			Rng rng(seed * 131 + 7);
			std::uniform_int_distribution<std::size_t> dim(2, 5);
			const std::size_t rows = dim(rng);
			const std::size_t cols = dim(rng);
			std::vector<Array2> theta;
			for (int k = 0; k < c.operands; ++k) {
				theta.push_back(c.positive ? positive_array(rows, cols, rng) : fcpflow::normal_array(rows, cols, rng));
			}
			const std::uint64_t weight_seed = seed + 1000;
			const double err = ad::finite_diff_check(
			    [&](ad::Tape &t, std::span<const ad::Var> p) {
				    Rng op_rng(weight_seed);
				    Rng reduce_rng(weight_seed + 1);
				    return random_reduction(c.op(t, p, op_rng), reduce_rng);
			    },
			    theta, 1e-5);
			EXPECT_LE(err, 1e-6) << c.name << " seed " << seed << " shape " << rows << "x" << cols;
			++checks;
		}
	}
	EXPECT_GE(checks, 20u * cases.size());
}

TEST(FiniteDiffCheck, SquareHasTinyError) {
	std::vector<Array2> theta{Array2{{3.0}}};
	const double err = ad::finite_diff_check(
	    [](ad::Tape &, std::span<const ad::Var> p) { return ad::square(p[0]); }, theta, 1e-5);
	EXPECT_LE(err, 1e-8);
}

TEST(FiniteDiffCheck, ExpSumOnRandomMatrix) {
	Rng rng(3);
	std::vector<Array2> theta{fcpflow::normal_array(2, 2, rng)};
	const double err = ad::finite_diff_check(
	    [](ad::Tape &, std::span<const ad::Var> p) { return ad::reduce_sum(ad::exp(p[0])); }, theta, 1e-5);
	EXPECT_LE(err, 1e-6);
}

TEST(FiniteDiffCheck, DetectsWrongGradient) {
	// f = theta^2 at 3: true gradient 6, report 12 -> relative error 1.
	// f = theta at 0.5 with reported gradient 1.5 -> error 0.5.
	Array2 theta{{0.5}};
	std::vector<Array2 *> params{&theta};
	const std::vector<Array2> wrong{Array2{{1.5}}};
	const double err = ad::finite_diff_check([&]() { return theta[0]; }, params, wrong, 1e-5);
	EXPECT_NEAR(err, 0.5, 1e-8);

	Array2 q{{3.0}};
	std::vector<Array2 *> qp{&q};
	const std::vector<Array2> doubled{Array2{{12.0}}};
	EXPECT_NEAR(ad::finite_diff_check([&]() { return q[0] * q[0]; }, qp, doubled, 1e-5), 1.0, 1e-6);
}

TEST(FiniteDiffCheck, NonFiniteProbeIsAnError) {
	Array2 theta{{0.0}};
	std::vector<Array2 *> params{&theta};
	const std::vector<Array2> g{Array2{{0.0}}};
	EXPECT_THROW(ad::finite_diff_check([&]() { return theta[0] > 0 ? std::log(-1.0) : 0.0; }, params, g, 1e-5),
	             fcpflow::NumericError);
}
