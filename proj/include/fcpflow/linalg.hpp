#pragma once

#include <cstdint>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "fcpflow/array.hpp"

namespace fcpflow {

using Rng = std::mt19937_64;

/// Seed for the index-th independent stream of a run (splitmix64 finalizer).
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
	std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
	z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
	z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
	return z ^ (z >> 31);
}

inline Array2 normal_array(std::size_t rows, std::size_t cols, Rng &rng, double stddev = 1.0) {
	std::normal_distribution<double> dist(0.0, stddev);
	Array2 out(rows, cols);
	for (double &v : out.values()) {
		v = dist(rng);
	}
	return out;
}

inline Array2 uniform_array(std::size_t rows, std::size_t cols, Rng &rng, double lo, double hi) {
	std::uniform_real_distribution<double> dist(lo, hi);
	Array2 out(rows, cols);
	for (double &v : out.values()) {
		v = dist(rng);
	}
	return out;
}

/// Random orthogonal matrix from modified Gram-Schmidt on a Gaussian matrix.
inline Array2 random_orthogonal(std::size_t n, Rng &rng) {
	Array2 q = normal_array(n, n, rng);
	for (std::size_t j = 0; j < n; ++j) {
		for (std::size_t k = 0; k < j; ++k) {
			double dot = 0.0;
			for (std::size_t i = 0; i < n; ++i) {
				dot += q(i, j) * q(i, k);
			}
			for (std::size_t i = 0; i < n; ++i) {
				q(i, j) -= dot * q(i, k);
			}
		}
		double norm = 0.0;
		for (std::size_t i = 0; i < n; ++i) {
			norm += q(i, j) * q(i, j);
		}
		norm = std::sqrt(norm);
		for (std::size_t i = 0; i < n; ++i) {
			q(i, j) /= norm;
		}
	}
	return q;
}

/// A = P * L * U with (P B)[i, :] = B[perm[i], :], L unit lower triangular
/// and U upper triangular.
struct PluFactors {
	std::vector<std::size_t> perm;
	Array2 lower;
	Array2 upper;
};

inline PluFactors plu_decompose(const Array2 &a) {
	if (a.rows() != a.cols()) {
		throw DimensionError("plu_decompose: matrix must be square, got " + a.shape_string());
	}
	const std::size_t n = a.rows();
	Array2 lu = a;
	std::vector<std::size_t> pivot(n);
	std::iota(pivot.begin(), pivot.end(), 0);
	for (std::size_t k = 0; k < n; ++k) {
		std::size_t best = k;
		for (std::size_t i = k + 1; i < n; ++i) {
			if (std::abs(lu(i, k)) > std::abs(lu(best, k))) {
				best = i;
			}
		}
		if (lu(best, k) == 0.0) {
			throw NumericError("plu_decompose: singular matrix");
		}
		if (best != k) {
			for (std::size_t j = 0; j < n; ++j) {
				std::swap(lu(k, j), lu(best, j));
			}
			std::swap(pivot[k], pivot[best]);
		}
		for (std::size_t i = k + 1; i < n; ++i) {
			lu(i, k) /= lu(k, k);
			for (std::size_t j = k + 1; j < n; ++j) {
				lu(i, j) -= lu(i, k) * lu(k, j);
			}
		}
	}
	// Row i of the pivoted matrix is row pivot[i] of A, so A = P L U with
	// perm = inverse(pivot).
	PluFactors f{std::vector<std::size_t>(n), Array2::identity(n), Array2(n, n)};
	for (std::size_t i = 0; i < n; ++i) {
		f.perm[pivot[i]] = i;
		for (std::size_t j = 0; j < n; ++j) {
			if (j < i) {
				f.lower(i, j) = lu(i, j);
			} else {
				f.upper(i, j) = lu(i, j);
			}
		}
	}
	return f;
}

} // namespace fcpflow
