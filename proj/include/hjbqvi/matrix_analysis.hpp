#ifndef HJBQVI_MATRIX_ANALYSIS_HPP
#define HJBQVI_MATRIX_ANALYSIS_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "linear_solvers.hpp"
#include "sparse.hpp"

namespace hjbqvi {

enum class RowLabel { sdd, wdd_not_sdd, not_wdd };

/// Per-row diagonal dominance.  slack is |a_ii| - sum_{j != i} |a_ij|,
/// computed from stored values; labels use a relative tolerance of
/// 1e-12 times the row 1-norm so that rows whose slack is structurally
/// zero are not misclassified by scaling round-off.
struct RowDominance {
	std::vector<RowLabel> label;
	std::vector<double> slack;

	bool all_wdd() const {
		for(RowLabel l : label)
			if(l == RowLabel::not_wdd) return false;
		return true;
	}

	std::size_t sdd_count() const {
		std::size_t c = 0;
		for(RowLabel l : label) c += l == RowLabel::sdd;
		return c;
	}
};

inline RowDominance classify_rows(const SparseMatrix &a) {
	const std::size_t n = a.size();
	RowDominance d;
	d.label.resize(n);
	d.slack.resize(n);
	for(std::size_t i = 0; i < n; ++i) {
		auto cols = a.row_cols(i);
		auto vals = a.row_vals(i);
		double diag = 0., off = 0.;
		for(std::size_t k = 0; k < cols.size(); ++k) {
			if(cols[k] == i) diag = std::abs(vals[k]);
			else off += std::abs(vals[k]);
		}
		const double slack = diag - off;
		const double tol = 1e-12 * (diag + off);
		d.slack[i] = slack;
		d.label[i] = slack > tol ? RowLabel::sdd
				: (slack >= -tol ? RowLabel::wdd_not_sdd : RowLabel::not_wdd);
	}
	return d;
}

/// Result of the weakly-chained check.  A matrix is WCDD when every row is
/// WDD and every row has a path in the matrix graph to an SDD row (the
/// one-vertex path counts when the row itself is SDD).
struct WcddReport {
	bool is_wcdd = false;
	RowDominance dominance;
	std::vector<std::size_t> non_reaching_rows; // rows with no path to an SDD row

	/// Witness path for a reaching row: row indices ending at an SDD row.
	/// Empty for non-reaching rows.
	std::vector<std::size_t> witness_path(std::size_t row) const {
		std::vector<std::size_t> path;
		if(row >= next_hop.size() || !reaches[row]) return path;
		std::size_t r = row;
		path.push_back(r);
		while(next_hop[r] != r) {
			r = next_hop[r];
			path.push_back(r);
		}
		return path;
	}

	std::vector<std::size_t> next_hop; // next vertex toward an SDD row; self at SDD rows
	std::vector<char> reaches;
};

/// Reachability to SDD rows via one reverse breadth-first search seeded at
/// all SDD rows simultaneously.  O(nnz + n).
inline WcddReport analyze_wcdd(const SparseMatrix &a) {
	const std::size_t n = a.size();
	WcddReport rep;
	rep.dominance = classify_rows(a);
	rep.next_hop.assign(n, 0);
	rep.reaches.assign(n, 0);

	// Reversed adjacency: for edge i -> j (a_ij != 0, i != j) store i under j.
	std::vector<std::size_t> in_ptr(n + 1, 0);
	std::vector<index_t> in_list;
	{
		std::size_t edges = 0;
		for(std::size_t i = 0; i < n; ++i) {
			auto cols = a.row_cols(i);
			for(index_t c : cols)
				if(c != i) ++in_ptr[c + 1], ++edges;
		}
		for(std::size_t j = 0; j < n; ++j) in_ptr[j + 1] += in_ptr[j];
		in_list.resize(edges);
		std::vector<std::size_t> cursor(in_ptr.begin(), in_ptr.end() - 1);
		for(std::size_t i = 0; i < n; ++i) {
			auto cols = a.row_cols(i);
			for(index_t c : cols)
				if(c != i) in_list[cursor[c]++] = static_cast<index_t>(i);
		}
	}

	std::vector<index_t> queue;
	queue.reserve(n);
	for(std::size_t i = 0; i < n; ++i) {
		if(rep.dominance.label[i] == RowLabel::sdd) {
			rep.reaches[i] = 1;
			rep.next_hop[i] = i;
			queue.push_back(static_cast<index_t>(i));
		}
	}
	for(std::size_t head = 0; head < queue.size(); ++head) {
		const index_t j = queue[head];
		for(std::size_t p = in_ptr[j]; p < in_ptr[j + 1]; ++p) {
			const index_t i = in_list[p];
			if(!rep.reaches[i]) {
				rep.reaches[i] = 1;
				rep.next_hop[i] = j;
				queue.push_back(i);
			}
		}
	}

	for(std::size_t i = 0; i < n; ++i)
		if(!rep.reaches[i]) rep.non_reaching_rows.push_back(i);

	rep.is_wcdd = rep.dominance.all_wdd() && rep.non_reaching_rows.empty();
	return rep;
}

inline bool is_wcdd(const SparseMatrix &a) { return analyze_wcdd(a).is_wcdd; }

/// True iff every stored off-diagonal entry is nonpositive.
inline bool is_z_matrix(const SparseMatrix &a) {
	for(std::size_t i = 0; i < a.size(); ++i) {
		auto cols = a.row_cols(i);
		auto vals = a.row_vals(i);
		for(std::size_t k = 0; k < cols.size(); ++k)
			if(cols[k] != i && vals[k] > 0.) return false;
	}
	return true;
}

struct MMatrixDiagnosis {
	bool ok = false;
	enum class Reason {
		none,
		positive_off_diagonal,
		nonpositive_diagonal,
		row_not_wdd,
		no_path_to_sdd_row
	} reason = Reason::none;
	std::size_t row = 0;          // first offending row, when applicable
	bool zero_row = false;        // offending row has no stored entries
	std::vector<std::size_t> non_reaching;

	std::string describe() const {
		switch(reason) {
		case Reason::none:
			return "nonsingular WDD M-matrix";
		case Reason::positive_off_diagonal:
			return "positive off-diagonal in row " + std::to_string(row);
		case Reason::nonpositive_diagonal:
			return (zero_row ? "zero row detected, row " : "nonpositive diagonal, row ")
					+ std::to_string(row);
		case Reason::row_not_wdd:
			return "row " + std::to_string(row) + " is not weakly diagonally dominant";
		case Reason::no_path_to_sdd_row:
			return std::to_string(non_reaching.size())
					+ " row(s) with no path to an SDD row";
		}
		return {};
	}
};

/// Checks that A is a Z-matrix with positive diagonals, all rows WDD, and
/// the WCDD path condition holds.  This set of conditions is equivalent to
/// A being a nonsingular WDD M-matrix; a WDD Z-matrix with positive
/// diagonals that fails the path condition is singular.
inline MMatrixDiagnosis diagnose_wdd_m_matrix(const SparseMatrix &a) {
	MMatrixDiagnosis d;
	const std::size_t n = a.size();
	for(std::size_t i = 0; i < n; ++i) {
		auto cols = a.row_cols(i);
		auto vals = a.row_vals(i);
		double diag = 0.;
		for(std::size_t k = 0; k < cols.size(); ++k) {
			if(cols[k] == i) diag = vals[k];
			else if(vals[k] > 0.) {
				d.reason = MMatrixDiagnosis::Reason::positive_off_diagonal;
				d.row = i;
				return d;
			}
		}
		if(!(diag > 0.)) {
			d.reason = MMatrixDiagnosis::Reason::nonpositive_diagonal;
			d.row = i;
			d.zero_row = cols.empty();
			return d;
		}
	}
	auto rep = analyze_wcdd(a);
	for(std::size_t i = 0; i < n; ++i) {
		if(rep.dominance.label[i] == RowLabel::not_wdd) {
			d.reason = MMatrixDiagnosis::Reason::row_not_wdd;
			d.row = i;
			return d;
		}
	}
	if(!rep.non_reaching_rows.empty()) {
		d.reason = MMatrixDiagnosis::Reason::no_path_to_sdd_row;
		d.row = rep.non_reaching_rows.front();
		d.non_reaching = std::move(rep.non_reaching_rows);
		return d;
	}
	d.ok = true;
	return d;
}

inline bool is_nonsingular_wdd_m_matrix(const SparseMatrix &a) {
	return diagnose_wdd_m_matrix(a).ok;
}

enum class MonotonicityVerdict { monotone, singular, negative_inverse_entry };

/// Dense oracle for monotonicity (Av >= 0 implies v >= 0): inverts A and
/// checks that every entry of the inverse is >= -tol.  Capped at small n.
inline MonotonicityVerdict monotonicity_oracle(const SparseMatrix &a, double tol = 1e-9,
		std::size_t cap = 64) {
	if(a.size() > cap)
		throw std::invalid_argument("monotonicity_oracle: matrix exceeds oracle cap");
	auto lu = DenseLu::factor(DenseMatrix::from_sparse(a));
	if(!lu) return MonotonicityVerdict::singular;
	DenseMatrix inv = lu->inverse();
	for(std::size_t i = 0; i < a.size(); ++i)
		for(std::size_t j = 0; j < a.size(); ++j)
			if(inv(i, j) < -tol)
				return MonotonicityVerdict::negative_inverse_entry;
	return MonotonicityVerdict::monotone;
}

} // namespace hjbqvi

#endif
