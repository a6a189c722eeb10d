#ifndef HJBQVI_SPARSE_HPP
#define HJBQVI_SPARSE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjbqvi {

using index_t = std::uint32_t;

struct Triplet {
	std::size_t row;
	std::size_t col;
	double value;
};

/// Accumulation buffer for assembling a single sparse row.  Entries may be
/// added in any order and with repeated column indices; finalize() sorts,
/// merges duplicates, and drops entries that cancel to exactly zero.
class SparseRowBuffer {
public:
	void clear() { entries_.clear(); }

	void add(std::size_t col, double value) {
		entries_.emplace_back(static_cast<index_t>(col), value);
	}

	void finalize() {
		std::sort(entries_.begin(), entries_.end(),
				[](const auto &a, const auto &b) { return a.first < b.first; });
		std::size_t out = 0;
		for(std::size_t i = 0; i < entries_.size();) {
			index_t col = entries_[i].first;
			double sum = 0.;
			while(i < entries_.size() && entries_[i].first == col) {
				sum += entries_[i].second;
				++i;
			}
			if(sum != 0.) entries_[out++] = {col, sum};
		}
		entries_.resize(out);
	}

	std::span<const std::pair<index_t, double>> entries() const {
		return entries_;
	}

	std::size_t size() const { return entries_.size(); }

private:
	std::vector<std::pair<index_t, double>> entries_;
};

/// Row-compressed square real matrix.  Immutable after construction; safe
/// for concurrent reads.  Column indices within a row are strictly
/// increasing.  A stored value of exactly zero is never kept: graph edges
/// coincide with stored entries.
class SparseMatrix {
public:
	SparseMatrix() : n_(0) { row_ptr_.push_back(0); }

	static SparseMatrix from_triplets(std::size_t n, std::vector<Triplet> triplets) {
		for(const auto &t : triplets) {
			if(t.row >= n || t.col >= n)
				throw std::invalid_argument("sparse: triplet index out of range");
		}
		std::sort(triplets.begin(), triplets.end(), [](const Triplet &a, const Triplet &b) {
			return a.row != b.row ? a.row < b.row : a.col < b.col;
		});
		SparseMatrix m;
		m.n_ = n;
		m.row_ptr_.assign(1, 0);
		m.row_ptr_.reserve(n + 1);
		std::size_t i = 0;
		for(std::size_t r = 0; r < n; ++r) {
			while(i < triplets.size() && triplets[i].row == r) {
				std::size_t c = triplets[i].col;
				double sum = 0.;
				while(i < triplets.size() && triplets[i].row == r
						&& triplets[i].col == c) {
					sum += triplets[i].value;
					++i;
				}
				if(sum != 0.) {
					m.cols_.push_back(static_cast<index_t>(c));
					m.vals_.push_back(sum);
				}
			}
			m.row_ptr_.push_back(m.cols_.size());
		}
		return m;
	}

	/// Assemble from per-row buffers (each buffer must be finalized).
	static SparseMatrix from_rows(std::size_t n, const std::vector<SparseRowBuffer> &rows) {
		if(rows.size() != n) throw std::invalid_argument("sparse: row count mismatch");
		SparseMatrix m;
		m.n_ = n;
		std::size_t nnz = 0;
		for(const auto &r : rows) nnz += r.size();
		m.cols_.reserve(nnz);
		m.vals_.reserve(nnz);
		m.row_ptr_.assign(1, 0);
		m.row_ptr_.reserve(n + 1);
		for(const auto &r : rows) {
			for(const auto &[c, v] : r.entries()) {
				if(c >= n) throw std::invalid_argument("sparse: column out of range");
				m.cols_.push_back(c);
				m.vals_.push_back(v);
			}
			m.row_ptr_.push_back(m.cols_.size());
		}
		return m;
	}

	static SparseMatrix identity(std::size_t n) {
		std::vector<Triplet> t;
		t.reserve(n);
		for(std::size_t i = 0; i < n; ++i) t.push_back({i, i, 1.});
		return from_triplets(n, std::move(t));
	}

	std::size_t size() const { return n_; }
	std::size_t nonzeros() const { return cols_.size(); }

	std::span<const index_t> row_cols(std::size_t i) const {
		return {cols_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
	}

	std::span<const double> row_vals(std::size_t i) const {
		return {vals_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
	}

	double coeff(std::size_t i, std::size_t j) const {
		auto cols = row_cols(i);
		auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<index_t>(j));
		if(it == cols.end() || *it != j) return 0.;
		return vals_[row_ptr_[i] + static_cast<std::size_t>(it - cols.begin())];
	}

	double row_dot(std::size_t i, std::span<const double> x) const {
		double s = 0.;
		for(std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
			s += vals_[k] * x[cols_[k]];
		return s;
	}

	std::vector<double> multiply(std::span<const double> x) const {
		if(x.size() != n_) throw std::invalid_argument("sparse: dimension mismatch");
		std::vector<double> y(n_);
		for(std::size_t i = 0; i < n_; ++i) y[i] = row_dot(i, x);
		return y;
	}

	/// Plain-text coordinate dump: "row col value", one entry per line,
	/// sorted by (row, col).
	std::string to_coordinate_text() const {
		std::string out;
		char line[96];
		for(std::size_t i = 0; i < n_; ++i) {
			for(std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
				std::snprintf(line, sizeof line, "%zu %u %.17g\n", i, cols_[k],
						vals_[k]);
				out += line;
			}
		}
		return out;
	}

private:
	std::size_t n_;
	std::vector<std::size_t> row_ptr_;
	std::vector<index_t> cols_;
	std::vector<double> vals_;
};

// Small dense-vector helpers shared across the library.

inline double max_norm(std::span<const double> v) {
	double m = 0.;
	for(double x : v) m = std::max(m, std::abs(x));
	return m;
}

inline double two_norm(std::span<const double> v) {
	double s = 0.;
	for(double x : v) s += x * x;
	return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
	double s = 0.;
	for(std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
	return s;
}

inline std::vector<double> residual(const SparseMatrix &A, std::span<const double> b,
		std::span<const double> x) {
	std::vector<double> r(b.begin(), b.end());
	for(std::size_t i = 0; i < A.size(); ++i) r[i] -= A.row_dot(i, x);
	return r;
}

} // namespace hjbqvi

#endif
