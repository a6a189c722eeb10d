#ifndef HJBQVI_LINEAR_SOLVERS_HPP
#define HJBQVI_LINEAR_SOLVERS_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sparse.hpp"

namespace hjbqvi {

struct SolverError : std::runtime_error {
	using std::runtime_error::runtime_error;
};

/// Per-solve statistics.  iterations == 0 means the initial guess already
/// met the residual criterion.
struct SolveStats {
	std::size_t iterations = 0;
	double final_relative_residual = 0.;
	bool breakdown = false;
	bool converged = false;
};

////////////////////////////////////////////////////////////////////////////////
// Dense LU with partial pivoting (oracle-scale systems only)
////////////////////////////////////////////////////////////////////////////////

/// Row-major dense square matrix.
class DenseMatrix {
public:
	DenseMatrix() : n_(0) {}
	explicit DenseMatrix(std::size_t n) : n_(n), a_(n * n, 0.) {}

	static DenseMatrix from_sparse(const SparseMatrix &s) {
		DenseMatrix d(s.size());
		for(std::size_t i = 0; i < s.size(); ++i) {
			auto cols = s.row_cols(i);
			auto vals = s.row_vals(i);
			for(std::size_t k = 0; k < cols.size(); ++k)
				d(i, cols[k]) = vals[k];
		}
		return d;
	}

	std::size_t size() const { return n_; }
	double &operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
	double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }

	double inf_norm() const {
		double m = 0.;
		for(std::size_t i = 0; i < n_; ++i) {
			double r = 0.;
			for(std::size_t j = 0; j < n_; ++j) r += std::abs((*this)(i, j));
			m = std::max(m, r);
		}
		return m;
	}

private:
	std::size_t n_;
	std::vector<double> a_;
};

/// LU factorization with partial pivoting.  factor() reports singularity
/// when a pivot falls below 1e-13 times the matrix infinity norm.
class DenseLu {
public:
	static std::optional<DenseLu> factor(DenseMatrix a) {
		DenseLu lu;
		const std::size_t n = a.size();
		lu.n_ = n;
		lu.perm_.resize(n);
		std::iota(lu.perm_.begin(), lu.perm_.end(), std::size_t{0});
		const double threshold = 1e-13 * std::max(a.inf_norm(),
				std::numeric_limits<double>::min());
		for(std::size_t k = 0; k < n; ++k) {
			std::size_t p = k;
			for(std::size_t i = k + 1; i < n; ++i)
				if(std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
			if(std::abs(a(p, k)) < threshold) return std::nullopt;
			if(p != k) {
				for(std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
				std::swap(lu.perm_[k], lu.perm_[p]);
			}
			for(std::size_t i = k + 1; i < n; ++i) {
				a(i, k) /= a(k, k);
				const double lik = a(i, k);
				if(lik == 0.) continue;
				for(std::size_t j = k + 1; j < n; ++j)
					a(i, j) -= lik * a(k, j);
			}
		}
		lu.lu_ = std::move(a);
		return lu;
	}

	std::vector<double> solve(std::span<const double> b) const {
		std::vector<double> x(n_);
		for(std::size_t i = 0; i < n_; ++i) x[i] = b[perm_[i]];
		for(std::size_t i = 1; i < n_; ++i)
			for(std::size_t j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
		for(std::size_t ii = n_; ii-- > 0;) {
			for(std::size_t j = ii + 1; j < n_; ++j) x[ii] -= lu_(ii, j) * x[j];
			x[ii] /= lu_(ii, ii);
		}
		return x;
	}

	DenseMatrix inverse() const {
		DenseMatrix inv(n_);
		std::vector<double> e(n_, 0.);
		for(std::size_t j = 0; j < n_; ++j) {
			e[j] = 1.;
			auto col = solve(e);
			e[j] = 0.;
			for(std::size_t i = 0; i < n_; ++i) inv(i, j) = col[i];
		}
		return inv;
	}

	double min_abs_pivot() const {
		double m = std::numeric_limits<double>::infinity();
		for(std::size_t i = 0; i < n_; ++i) m = std::min(m, std::abs(lu_(i, i)));
		return m;
	}

private:
	std::size_t n_ = 0;
	DenseMatrix lu_;
	std::vector<std::size_t> perm_;
};

/// Partial-pivoting dense solve.  Throws SolverError on singular input.
inline std::vector<double> solve_dense_lu(const DenseMatrix &a, std::span<const double> b) {
	auto lu = DenseLu::factor(a);
	if(!lu) throw SolverError("dense LU: matrix is singular");
	return lu->solve(b);
}

inline std::vector<double> solve_dense_lu(const SparseMatrix &a, std::span<const double> b) {
	return solve_dense_lu(DenseMatrix::from_sparse(a), b);
}

////////////////////////////////////////////////////////////////////////////////
// Tridiagonal elimination
////////////////////////////////////////////////////////////////////////////////

/// Thomas algorithm.  sub has length n-1 (below the diagonal), diag length n,
/// super length n-1.  A zero pivot cannot occur for the WCDD systems this is
/// used on and is treated as a caller error.
inline std::vector<double> solve_tridiagonal(std::span<const double> sub,
		std::span<const double> diag, std::span<const double> super,
		std::span<const double> b) {
	const std::size_t n = diag.size();
	if(b.size() != n || (n > 0 && (sub.size() != n - 1 || super.size() != n - 1)))
		throw std::invalid_argument("tridiagonal: dimension mismatch");
	if(n == 0) return {};
	double scale = 0.;
	for(double d : diag) scale = std::max(scale, std::abs(d));
	std::vector<double> c(n - 1 > 0 ? n - 1 : 0), x(n);
	double piv = diag[0];
	if(std::abs(piv) <= 1e-14 * scale) throw SolverError("tridiagonal: zero pivot");
	x[0] = b[0] / piv;
	for(std::size_t i = 1; i < n; ++i) {
		c[i - 1] = super[i - 1] / piv;
		piv = diag[i] - sub[i - 1] * c[i - 1];
		if(std::abs(piv) <= 1e-14 * scale)
			throw SolverError("tridiagonal: zero pivot");
		x[i] = (b[i] - sub[i - 1] * x[i - 1]) / piv;
	}
	for(std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
	return x;
}

////////////////////////////////////////////////////////////////////////////////
// ILUT preconditioner
////////////////////////////////////////////////////////////////////////////////

/// Incomplete LU with dual truncation: entries below drop_tol times the
/// original row 2-norm are discarded, and each factored row keeps at most
/// (original nonzeros + fill_cap) entries, ranked by magnitude.  The
/// diagonal is always kept.
class IlutPreconditioner {
public:
	IlutPreconditioner(const SparseMatrix &a, std::size_t fill_cap = 10,
			double drop_tol = 1e-4)
			: n_(a.size()) {
		l_ptr_.assign(1, 0);
		u_ptr_.assign(1, 0);
		u_diag_.resize(n_);

		std::vector<double> work(n_, 0.);
		std::vector<index_t> touched;
		std::vector<index_t> lower;

		for(std::size_t i = 0; i < n_; ++i) {
			auto cols = a.row_cols(i);
			auto vals = a.row_vals(i);
			double row_norm = 0.;
			touched.clear();
			lower.clear();
			for(std::size_t k = 0; k < cols.size(); ++k) {
				work[cols[k]] = vals[k];
				touched.push_back(cols[k]);
				row_norm += vals[k] * vals[k];
				if(cols[k] < i) lower.push_back(cols[k]);
			}
			row_norm = std::sqrt(row_norm);
			const double drop = drop_tol * row_norm;

			// Eliminate against previously factored rows in ascending
			// column order; fill-in joins the active set.
			std::size_t q = 0;
			std::sort(lower.begin(), lower.end());
			while(q < lower.size()) {
				const index_t k = lower[q++];
				double factor = work[k] / u_diag_[k];
				if(std::abs(factor) < drop) {
					work[k] = 0.;
					continue;
				}
				work[k] = factor;
				for(std::size_t p = u_ptr_[k]; p < u_ptr_[k + 1]; ++p) {
					const index_t j = u_cols_[p];
					if(work[j] == 0. && std::find(touched.begin(),
							touched.end(), j) == touched.end()) {
						touched.push_back(j);
						if(j < i) {
							lower.insert(std::lower_bound(
									lower.begin() + q,
									lower.end(), j), j);
						}
					}
					work[j] -= factor * u_vals_[p];
				}
			}

			// Collect, drop small entries, enforce the fill cap.
			std::vector<std::pair<index_t, double>> lrow, urow;
			double diag = work[i];
			for(index_t j : touched) {
				const double v = work[j];
				work[j] = 0.;
				if(j == i) continue;
				if(std::abs(v) < drop || v == 0.) continue;
				(j < i ? lrow : urow).emplace_back(j, v);
			}
			const std::size_t cap = cols.size() + fill_cap;
			auto shrink = [cap](std::vector<std::pair<index_t, double>> &row,
					std::size_t budget) {
				if(row.size() <= budget) return;
				std::partial_sort(row.begin(), row.begin() + budget, row.end(),
						[](const auto &x, const auto &y) {
							return std::abs(x.second) > std::abs(y.second);
						});
				row.resize(budget);
			};
			if(lrow.size() + urow.size() + 1 > cap) {
				const std::size_t budget = cap > 1 ? cap - 1 : 0;
				const std::size_t lb = std::min(lrow.size(), budget / 2);
				shrink(lrow, lb);
				shrink(urow, budget - lb);
			}
			std::sort(lrow.begin(), lrow.end());
			std::sort(urow.begin(), urow.end());

			if(diag == 0. || std::abs(diag) < 1e-14 * row_norm)
				diag = (diag < 0. ? -1. : 1.)
						* std::max(drop, 1e-14 * row_norm
								+ std::numeric_limits<double>::min());
			u_diag_[i] = diag;
			for(const auto &[j, v] : lrow) {
				l_cols_.push_back(j);
				l_vals_.push_back(v);
			}
			for(const auto &[j, v] : urow) {
				u_cols_.push_back(j);
				u_vals_.push_back(v);
			}
			l_ptr_.push_back(l_cols_.size());
			u_ptr_.push_back(u_cols_.size());
		}
	}

	/// z = (LU)^{-1} r
	void apply(std::span<const double> r, std::vector<double> &z) const {
		z.assign(r.begin(), r.end());
		for(std::size_t i = 0; i < n_; ++i)
			for(std::size_t p = l_ptr_[i]; p < l_ptr_[i + 1]; ++p)
				z[i] -= l_vals_[p] * z[l_cols_[p]];
		for(std::size_t i = n_; i-- > 0;) {
			for(std::size_t p = u_ptr_[i]; p < u_ptr_[i + 1]; ++p)
				z[i] -= u_vals_[p] * z[u_cols_[p]];
			z[i] /= u_diag_[i];
		}
	}

	std::size_t size() const { return n_; }

private:
	std::size_t n_;
	std::vector<std::size_t> l_ptr_, u_ptr_;
	std::vector<index_t> l_cols_, u_cols_;
	std::vector<double> l_vals_, u_vals_, u_diag_;
};

////////////////////////////////////////////////////////////////////////////////
// BiCGSTAB
////////////////////////////////////////////////////////////////////////////////

struct BicgstabOptions {
	double rtol = 1e-10;
	std::size_t maxit = 1000;
	double floor = 1.; // residual criterion uses max(||b||, floor)
	bool throw_on_failure = true;
};

/// Right-preconditioned BiCGSTAB.  Convergence criterion:
/// ||b - Ax||_2 <= rtol * max(||b||_2, floor).  Returns x0 untouched with
/// iterations == 0 when the initial residual already satisfies it.  On
/// breakdown the solve restarts once from the current iterate perturbed by
/// the last residual before giving up.
inline std::pair<std::vector<double>, SolveStats> solve_bicgstab(const SparseMatrix &a,
		std::span<const double> b, std::span<const double> x0,
		const IlutPreconditioner &m, const BicgstabOptions &opt = {}) {
	const std::size_t n = a.size();
	if(b.size() != n || x0.size() != n || m.size() != n)
		throw std::invalid_argument("bicgstab: dimension mismatch");
	if(!(opt.rtol > 0.)) throw std::invalid_argument("bicgstab: rtol must be positive");

	SolveStats stats;
	const double target = opt.rtol * std::max(two_norm(b), opt.floor);

	std::vector<double> x(x0.begin(), x0.end());
	std::vector<double> r = residual(a, b, x);
	double rnorm = two_norm(r);
	if(rnorm <= target) {
		stats.converged = true;
		stats.final_relative_residual = rnorm / std::max(two_norm(b), opt.floor);
		return {std::move(x), stats};
	}

	std::vector<double> rhat, p(n, 0.), v(n, 0.), phat(n), s(n), shat(n), t(n);
	bool restarted = false;

	auto restart = [&]() {
		rhat = r;
		std::fill(p.begin(), p.end(), 0.);
		std::fill(v.begin(), v.end(), 0.);
	};
	restart();

	double rho = 1., alpha = 1., omega = 1.;
	const double tiny = std::numeric_limits<double>::min() * 1e4;

	while(stats.iterations < opt.maxit) {
		const double rho1 = dot(rhat, r);
		if(std::abs(rho1) < tiny || std::abs(omega) < tiny) {
			if(!restarted) {
				// One retry: perturb the iterate by the residual.
				restarted = true;
				for(std::size_t i = 0; i < n; ++i) x[i] += r[i];
				r = residual(a, b, x);
				rnorm = two_norm(r);
				if(rnorm <= target) break;
				restart();
				rho = alpha = omega = 1.;
				continue;
			}
			stats.breakdown = true;
			break;
		}
		const double beta = (rho1 / rho) * (alpha / omega);
		for(std::size_t i = 0; i < n; ++i)
			p[i] = r[i] + beta * (p[i] - omega * v[i]);
		m.apply(p, phat);
		v = a.multiply(phat);
		const double rhat_v = dot(rhat, v);
		if(std::abs(rhat_v) < tiny) {
			stats.breakdown = true;
			break;
		}
		alpha = rho1 / rhat_v;
		for(std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
		++stats.iterations;
		if(two_norm(s) <= target) {
			for(std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
			r = residual(a, b, x);
			rnorm = two_norm(r);
			if(rnorm <= target) break;
			restart();
			rho = alpha = omega = 1.;
			continue;
		}
		m.apply(s, shat);
		t = a.multiply(shat);
		const double tt = dot(t, t);
		if(tt < tiny) {
			stats.breakdown = true;
			break;
		}
		omega = dot(t, s) / tt;
		for(std::size_t i = 0; i < n; ++i) {
			x[i] += alpha * phat[i] + omega * shat[i];
			r[i] = s[i] - omega * t[i];
		}
		rho = rho1;
		rnorm = two_norm(r);
		if(rnorm <= target) {
			// Recurrence residuals drift; confirm with the true residual
			// and restart from it if the recurrence was optimistic.
			r = residual(a, b, x);
			rnorm = two_norm(r);
			if(rnorm <= target) break;
			restart();
			rho = alpha = omega = 1.;
		}
	}

	stats.final_relative_residual = rnorm / std::max(two_norm(b), opt.floor);
	stats.converged = rnorm <= target && !stats.breakdown;
	if(!stats.converged && opt.throw_on_failure) {
		if(stats.breakdown)
			throw SolverError("bicgstab: breakdown after restart");
		throw SolverError("bicgstab: maxit reached, relative residual "
				+ std::to_string(stats.final_relative_residual));
	}
	return {std::move(x), stats};
}

} // namespace hjbqvi

#endif
