#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fcpflow/errors.hpp"

namespace fcpflow {

/// Dense row-major matrix of doubles. Rows index the batch, columns the
/// feature (time step) dimension.
class Array2 {
public:
	Array2() = default;

	Array2(std::size_t rows, std::size_t cols, double fill = 0.0)
	    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
	}

	Array2(std::size_t rows, std::size_t cols, std::vector<double> data)
	    : rows_(rows), cols_(cols), data_(std::move(data)) {
		if (data_.size() != rows_ * cols_) {
			throw DimensionError("Array2: data length " + std::to_string(data_.size()) + " != " +
			                     std::to_string(rows_) + "x" + std::to_string(cols_));
		}
	}

	Array2(std::initializer_list<std::initializer_list<double>> rows) {
		rows_ = rows.size();
		cols_ = rows_ == 0 ? 0 : rows.begin()->size();
		data_.reserve(rows_ * cols_);
		for (const auto &r : rows) {
			if (r.size() != cols_) {
				throw DimensionError("Array2: ragged initializer");
			}
			data_.insert(data_.end(), r.begin(), r.end());
		}
	}

	static Array2 identity(std::size_t n) {
		Array2 out(n, n);
		for (std::size_t i = 0; i < n; ++i) {
			out(i, i) = 1.0;
		}
		return out;
	}

	static Array2 row_vector(std::span<const double> values) {
		return Array2(1, values.size(), std::vector<double>(values.begin(), values.end()));
	}

	std::size_t rows() const noexcept {
		return rows_;
	}
	std::size_t cols() const noexcept {
		return cols_;
	}
	std::size_t size() const noexcept {
		return data_.size();
	}
	bool empty() const noexcept {
		return data_.empty();
	}

	double &operator()(std::size_t r, std::size_t c) {
		return data_[r * cols_ + c];
	}
	double operator()(std::size_t r, std::size_t c) const {
		return data_[r * cols_ + c];
	}
	double &operator[](std::size_t i) {
		return data_[i];
	}
	double operator[](std::size_t i) const {
		return data_[i];
	}

	std::span<double> values() noexcept {
		return data_;
	}
	std::span<const double> values() const noexcept {
		return data_;
	}
	double *data() noexcept {
		return data_.data();
	}
	const double *data() const noexcept {
		return data_.data();
	}

	std::span<double> row(std::size_t r) {
		return {data_.data() + r * cols_, cols_};
	}
	std::span<const double> row(std::size_t r) const {
		return {data_.data() + r * cols_, cols_};
	}

	bool same_shape(const Array2 &other) const noexcept {
		return rows_ == other.rows_ && cols_ == other.cols_;
	}

	std::string shape_string() const {
		return std::to_string(rows_) + "x" + std::to_string(cols_);
	}

	bool all_finite() const noexcept {
		return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
	}

	void fill(double v) {
		std::fill(data_.begin(), data_.end(), v);
	}

	Array2 &operator+=(const Array2 &other) {
		if (!same_shape(other)) {
			throw DimensionError("Array2 +=: " + shape_string() + " vs " + other.shape_string());
		}
		for (std::size_t i = 0; i < data_.size(); ++i) {
			data_[i] += other.data_[i];
		}
		return *this;
	}

	friend bool operator==(const Array2 &, const Array2 &) = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajor> view(const Array2 &a) {
	return {a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())};
}

inline Eigen::Map<RowMajor> view(Array2 &a) {
	return {a.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols())};
}

} // namespace detail

/// a * b
inline Array2 matmul(const Array2 &a, const Array2 &b) {
	if (a.cols() != b.rows()) {
		throw DimensionError("matmul: inner dimensions differ (" + a.shape_string() + " * " + b.shape_string() + ")");
	}
	Array2 out(a.rows(), b.cols());
	if (a.cols() > 0) {
		detail::view(out).noalias() = detail::view(a) * detail::view(b);
	}
	return out;
}

/// transpose(a) * b
inline Array2 matmul_tn(const Array2 &a, const Array2 &b) {
	if (a.rows() != b.rows()) {
		throw DimensionError("matmul_tn: " + a.shape_string() + " vs " + b.shape_string());
	}
	Array2 out(a.cols(), b.cols());
	if (a.rows() > 0) {
		detail::view(out).noalias() = detail::view(a).transpose() * detail::view(b);
	}
	return out;
}

/// a * transpose(b)
inline Array2 matmul_nt(const Array2 &a, const Array2 &b) {
	if (a.cols() != b.cols()) {
		throw DimensionError("matmul_nt: " + a.shape_string() + " vs " + b.shape_string());
	}
	Array2 out(a.rows(), b.rows());
	if (a.cols() > 0) {
		detail::view(out).noalias() = detail::view(a) * detail::view(b).transpose();
	}
	return out;
}

inline Array2 transpose(const Array2 &a) {
	Array2 out(a.cols(), a.rows());
	for (std::size_t r = 0; r < a.rows(); ++r) {
		for (std::size_t c = 0; c < a.cols(); ++c) {
			out(c, r) = a(r, c);
		}
	}
	return out;
}

/// Rows [begin, begin + count) of a.
inline Array2 slice_rows(const Array2 &a, std::size_t begin, std::size_t count) {
	if (begin + count > a.rows()) {
		throw DimensionError("slice_rows: range exceeds " + a.shape_string());
	}
	return Array2(count, a.cols(),
	              std::vector<double>(a.data() + begin * a.cols(), a.data() + (begin + count) * a.cols()));
}

/// Rows of a picked by index.
inline Array2 gather_rows(const Array2 &a, std::span<const std::size_t> index) {
	Array2 out(index.size(), a.cols());
	for (std::size_t i = 0; i < index.size(); ++i) {
		if (index[i] >= a.rows()) {
			throw DimensionError("gather_rows: index out of range");
		}
		std::copy_n(a.row(index[i]).begin(), a.cols(), out.row(i).begin());
	}
	return out;
}

inline Array2 hconcat(const Array2 &a, const Array2 &b) {
	if (a.rows() != b.rows()) {
		throw DimensionError("hconcat: row counts differ (" + a.shape_string() + ", " + b.shape_string() + ")");
	}
	Array2 out(a.rows(), a.cols() + b.cols());
	for (std::size_t r = 0; r < a.rows(); ++r) {
		std::copy_n(a.row(r).begin(), a.cols(), out.row(r).begin());
		std::copy_n(b.row(r).begin(), b.cols(), out.row(r).begin() + static_cast<std::ptrdiff_t>(a.cols()));
	}
	return out;
}

inline Array2 vconcat(const Array2 &a, const Array2 &b) {
	if (a.empty() && a.rows() == 0) {
		return b;
	}
	if (a.cols() != b.cols()) {
		throw DimensionError("vconcat: column counts differ");
	}
	std::vector<double> data(a.values().begin(), a.values().end());
	data.insert(data.end(), b.values().begin(), b.values().end());
	return Array2(a.rows() + b.rows(), a.cols(), std::move(data));
}

/// Largest absolute entry-wise difference.
inline double max_abs_diff(const Array2 &a, const Array2 &b) {
	if (!a.same_shape(b)) {
		throw DimensionError("max_abs_diff: " + a.shape_string() + " vs " + b.shape_string());
	}
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i) {
		m = std::max(m, std::abs(a[i] - b[i]));
	}
	return m;
}

} // namespace fcpflow
