#ifndef HJBQVI_BELLMAN_HPP
#define HJBQVI_BELLMAN_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "linear_solvers.hpp"
#include "matrix_analysis.hpp"
#include "parallel.hpp"
#include "sparse.hpp"

namespace hjbqvi {

/// One control per row, identified by its enumeration index.
using Policy = std::vector<index_t>;

/// Row-decoupled Bellman problem: find v with sup_P { -A(P)v + b(P) } = 0.
/// Controls for row i are indices 0 .. control_count(i)-1; row() materializes
/// the A(P) row for one choice and returns the b entry.  best_control, when
/// set, must return the same argmax the enumeration would (ties resolved to
/// the lowest index); it exists so large problems can keep the per-control
/// loop free of indirection.
struct BellmanProblem {
	std::size_t size = 0;
	std::function<std::size_t(std::size_t i)> control_count;
	std::function<double(std::size_t i, std::size_t k, SparseRowBuffer &)> row;
	std::function<index_t(std::size_t i, std::span<const double> v)> best_control;
};

namespace detail {

inline double control_value(const BellmanProblem &p, std::size_t i, std::size_t k,
		std::span<const double> v, SparseRowBuffer &buf) {
	buf.clear();
	const double b = p.row(i, k, buf);
	double av = 0.;
	for(const auto &[c, val] : buf.entries()) av += val * v[c];
	return b - av;
}

} // namespace detail

/// All control values -A(P)v + b(P) for one row, in enumeration order.
inline std::vector<double> control_values(const BellmanProblem &p, std::size_t i,
		std::span<const double> v) {
	SparseRowBuffer buf;
	const std::size_t count = p.control_count(i);
	std::vector<double> values(count);
	for(std::size_t k = 0; k < count; ++k)
		values[k] = detail::control_value(p, i, k, v, buf);
	return values;
}

/// Row-wise supremum of -A(P)v + b(P) over the full control set.
inline std::vector<double> bellman_sup(const BellmanProblem &p, std::span<const double> v,
		std::size_t threads = 1) {
	std::vector<double> sup(p.size);
	parallel_for(p.size, threads, [&](std::size_t begin, std::size_t end) {
		SparseRowBuffer buf;
		for(std::size_t i = begin; i < end; ++i) {
			double best = -std::numeric_limits<double>::infinity();
			const std::size_t count = p.control_count(i);
			for(std::size_t k = 0; k < count; ++k)
				best = std::max(best,
						detail::control_value(p, i, k, v, buf));
			sup[i] = best;
		}
	});
	return sup;
}

/// Row-wise argmax of -A(P)v + b(P).  The finite nonempty control sets make
/// the argmax total; ties go to the lowest enumeration index.
inline Policy improve_policy(const BellmanProblem &p, std::span<const double> v,
		std::size_t threads = 1) {
	Policy policy(p.size);
	parallel_for(p.size, threads, [&](std::size_t begin, std::size_t end) {
		SparseRowBuffer buf;
		for(std::size_t i = begin; i < end; ++i) {
			if(p.best_control) {
				policy[i] = p.best_control(i, v);
				continue;
			}
			const std::size_t count = p.control_count(i);
			if(count == 0)
				throw std::logic_error("bellman: empty control set");
			index_t best_k = 0;
			double best = detail::control_value(p, i, 0, v, buf);
			for(std::size_t k = 1; k < count; ++k) {
				const double val = detail::control_value(p, i, k, v, buf);
				if(val > best) {
					best = val;
					best_k = static_cast<index_t>(k);
				}
			}
			policy[i] = best_k;
		}
	});
	return policy;
}

/// Materialize A(P) and b(P) for a full policy.
inline std::pair<SparseMatrix, std::vector<double>> assemble_policy(const BellmanProblem &p,
		const Policy &policy, std::size_t threads = 1) {
	std::vector<SparseRowBuffer> rows(p.size);
	std::vector<double> b(p.size);
	parallel_for(p.size, threads, [&](std::size_t begin, std::size_t end) {
		for(std::size_t i = begin; i < end; ++i) {
			b[i] = p.row(i, policy[i], rows[i]);
			rows[i].finalize();
		}
	});
	return {SparseMatrix::from_rows(p.size, rows), std::move(b)};
}

enum class PiTermination { tolerance, policy_repeat, max_iterations, singular_matrix };

struct PiStats {
	std::size_t iterations = 0;           // completed improve+solve rounds
	std::vector<SolveStats> solves;
	std::vector<double> residual_history; // relative-change metric per round
	PiTermination termination = PiTermination::max_iterations;
	Policy final_policy;

	// Populated when termination == singular_matrix.
	std::size_t failure_iteration = 0;
	MMatrixDiagnosis failure_diagnosis;
	Policy offending_policy;

	double avg_solver_iterations() const {
		if(solves.empty()) return 0.;
		double s = 0.;
		for(const auto &st : solves) s += static_cast<double>(st.iterations);
		return s / static_cast<double>(solves.size());
	}
};

enum class PiLinearSolver { automatic, bicgstab, dense_lu };

struct PiOptions {
	double tol = 1e-6;
	double scale = 1.;
	std::size_t maxit = 200;
	PiLinearSolver solver = PiLinearSolver::automatic;
	BicgstabOptions linear{};
	std::size_t ilut_fill = 10;
	double ilut_drop = 1e-4;
	bool wcdd_guard = true; // reject singular iterates before the solve
	std::size_t threads = 1;
	std::size_t dense_cap = 64;
	// called after each completed round with the new iterate
	std::function<void(std::size_t iteration, std::span<const double> v)> observer;
};

namespace detail {

inline std::pair<std::vector<double>, SolveStats> pi_solve(const SparseMatrix &a,
		std::span<const double> b, std::span<const double> x0, const PiOptions &opt) {
	const bool dense = opt.solver == PiLinearSolver::dense_lu
			|| (opt.solver == PiLinearSolver::automatic && a.size() <= opt.dense_cap);
	if(dense) {
		SolveStats st;
		st.converged = true;
		return {solve_dense_lu(a, b), st};
	}
	IlutPreconditioner pre(a, opt.ilut_fill, opt.ilut_drop);
	BicgstabOptions lin = opt.linear;
	lin.throw_on_failure = false;
	auto [x, st] = solve_bicgstab(a, b, x0, pre, lin);
	if(!st.converged) {
		if(a.size() <= opt.dense_cap) return {solve_dense_lu(a, b), st};
		if(st.breakdown) throw SolverError("policy iteration: bicgstab breakdown");
		throw SolverError("policy iteration: linear solve stalled, residual "
				+ std::to_string(st.final_relative_residual));
	}
	return {std::move(x), st};
}

inline double relative_change(std::span<const double> v, std::span<const double> prev,
		double scale) {
	double m = 0.;
	for(std::size_t i = 0; i < v.size(); ++i)
		m = std::max(m, std::abs(v[i] - prev[i]) / std::max(std::abs(v[i]), scale));
	return m;
}

} // namespace detail

/// Howard policy iteration: alternate the row-wise argmax with a linear
/// solve started from the previous iterate.  Stops when the relative change
/// max_i |v_i - v'_i| / max(|v_i|, scale) drops below tol, when the selected
/// policy repeats exactly (finite termination on finite control sets), or at
/// maxit.  Every iterate matrix must pass the WDD M-matrix check; a failure
/// ends the run with termination == singular_matrix and the offending policy
/// recorded.
inline std::pair<std::vector<double>, PiStats> policy_iteration(const BellmanProblem &p,
		std::vector<double> v0, const PiOptions &opt = {}) {
	if(v0.size() != p.size)
		throw std::invalid_argument("policy iteration: bad initial guess size");
	if(!(opt.tol > 0.) || !(opt.scale > 0.))
		throw std::invalid_argument("policy iteration: tol and scale must be positive");

	PiStats stats;
	std::vector<double> v = std::move(v0);
	Policy prev_policy;

	for(std::size_t ell = 1; ell <= opt.maxit; ++ell) {
		Policy policy = improve_policy(p, v, opt.threads);
		if(ell > 1 && policy == prev_policy) {
			stats.termination = PiTermination::policy_repeat;
			stats.final_policy = std::move(policy);
			return {std::move(v), stats};
		}

		auto [a, b] = assemble_policy(p, policy, opt.threads);
		if(opt.wcdd_guard) {
			auto diag = diagnose_wdd_m_matrix(a);
			if(!diag.ok) {
				stats.termination = PiTermination::singular_matrix;
				stats.failure_iteration = ell;
				stats.failure_diagnosis = std::move(diag);
				stats.offending_policy = std::move(policy);
				return {std::move(v), stats};
			}
		}

		auto [next, solve_stats] = detail::pi_solve(a, b, v, opt);
		stats.solves.push_back(solve_stats);
		const double metric = detail::relative_change(next, v, opt.scale);
		stats.residual_history.push_back(metric);
		++stats.iterations;
		v = std::move(next);
		prev_policy = std::move(policy);
		if(opt.observer) opt.observer(ell, v);
		if(metric < opt.tol) {
			stats.termination = PiTermination::tolerance;
			stats.final_policy = prev_policy;
			return {std::move(v), stats};
		}
	}
	stats.termination = PiTermination::max_iterations;
	stats.final_policy = prev_policy;
	return {std::move(v), stats};
}

/// Schedule for the slack sequence of the inexact iteration; must be
/// positive with summable terms.  Default: eps0 * 2^-ell.
struct EpsSchedule {
	double eps0 = 1e-3;
	std::function<double(std::size_t ell)> value;

	double operator()(std::size_t ell) const {
		if(value) return value(ell);
		return eps0 * std::pow(2., -static_cast<double>(ell));
	}
};

/// Hook for tests that deliberately return a suboptimal-but-admissible
/// control: any k with values[k] >= values[exact] - eps is accepted.
using RelaxedPicker = std::function<index_t(std::size_t row, std::span<const double> values,
		index_t exact, double eps)>;

/// Policy iteration with an approximate argmax: the chosen control may fall
/// short of the row maximum by at most eps_ell.  With an exact argmax (no
/// picker) this is plain policy_iteration.  In relaxed mode the policy-repeat
/// stop is unsound (a repeated inexact pick proves nothing), so the run stops
/// once the change metric is below tol and eps_ell has decayed below tol.
inline std::pair<std::vector<double>, PiStats> epsilon_policy_iteration(
		const BellmanProblem &p, std::vector<double> v0, const EpsSchedule &eps,
		const PiOptions &opt = {}, const RelaxedPicker &picker = {}) {
	if(!picker) return policy_iteration(p, std::move(v0), opt);
	if(v0.size() != p.size)
		throw std::invalid_argument("policy iteration: bad initial guess size");

	PiStats stats;
	std::vector<double> v = std::move(v0);

	for(std::size_t ell = 1; ell <= opt.maxit; ++ell) {
		const double eps_ell = eps(ell);
		if(!(eps_ell > 0.))
			throw std::invalid_argument("epsilon policy iteration: eps must be positive");
		Policy policy(p.size);
		parallel_for(p.size, opt.threads, [&](std::size_t begin, std::size_t end) {
			for(std::size_t i = begin; i < end; ++i) {
				auto values = control_values(p, i, v);
				index_t exact = 0;
				for(std::size_t k = 1; k < values.size(); ++k)
					if(values[k] > values[exact])
						exact = static_cast<index_t>(k);
				index_t pick = picker(i, values, exact, eps_ell);
				if(pick >= values.size()
						|| values[pick] < values[exact] - eps_ell)
					pick = exact; // inadmissible pick: fall back
				policy[i] = pick;
			}
		});

		auto [a, b] = assemble_policy(p, policy, opt.threads);
		if(opt.wcdd_guard) {
			auto diag = diagnose_wdd_m_matrix(a);
			if(!diag.ok) {
				stats.termination = PiTermination::singular_matrix;
				stats.failure_iteration = ell;
				stats.failure_diagnosis = std::move(diag);
				stats.offending_policy = std::move(policy);
				return {std::move(v), stats};
			}
		}
		auto [next, solve_stats] = detail::pi_solve(a, b, v, opt);
		stats.solves.push_back(solve_stats);
		const double metric = detail::relative_change(next, v, opt.scale);
		stats.residual_history.push_back(metric);
		++stats.iterations;
		v = std::move(next);
		stats.final_policy = std::move(policy);
		if(opt.observer) opt.observer(ell, v);
		if(metric < opt.tol && eps_ell < opt.tol) {
			stats.termination = PiTermination::tolerance;
			return {std::move(v), stats};
		}
	}
	stats.termination = PiTermination::max_iterations;
	return {std::move(v), stats};
}

/// Enumeration oracle: solves A(P)v = b(P) for every global policy and
/// returns the unique v whose Bellman residual is zero to within 1e-9.
/// Intended for small instances only (product of control counts <= 1e5).
inline std::vector<double> brute_force_bellman(const BellmanProblem &p,
		double residual_tol = 1e-9, double match_tol = 1e-7) {
	const std::size_t n = p.size;
	double combos = 1.;
	std::vector<std::size_t> counts(n);
	for(std::size_t i = 0; i < n; ++i) {
		counts[i] = p.control_count(i);
		if(counts[i] == 0) throw std::logic_error("bellman: empty control set");
		combos *= static_cast<double>(counts[i]);
		if(combos > 1e5)
			throw std::invalid_argument("brute force: control space too large");
	}

	std::vector<std::vector<double>> candidates;
	Policy policy(n, 0);
	SparseRowBuffer buf;
	for(;;) {
		DenseMatrix a(n);
		std::vector<double> b(n);
		for(std::size_t i = 0; i < n; ++i) {
			buf.clear();
			b[i] = p.row(i, policy[i], buf);
			buf.finalize();
			for(const auto &[c, val] : buf.entries()) a(i, c) = val;
		}
		if(auto lu = DenseLu::factor(std::move(a))) {
			auto v = lu->solve(b);
			auto sup = bellman_sup(p, v);
			bool solves = true;
			for(double s : sup)
				if(std::abs(s) > residual_tol) { solves = false; break; }
			if(solves) {
				bool fresh = true;
				for(const auto &c : candidates) {
					double diff = 0.;
					for(std::size_t i = 0; i < n; ++i)
						diff = std::max(diff, std::abs(c[i] - v[i]));
					if(diff <= match_tol) { fresh = false; break; }
				}
				if(fresh) candidates.push_back(std::move(v));
			}
		}
		// odometer over global policies
		std::size_t d = 0;
		while(d < n) {
			if(++policy[d] < counts[d]) break;
			policy[d] = 0;
			++d;
		}
		if(d == n) break;
	}

	if(candidates.empty())
		throw std::runtime_error("brute force: no policy solves the Bellman problem");
	if(candidates.size() > 1)
		throw std::runtime_error("brute force: solution is not unique");
	return candidates.front();
}

} // namespace hjbqvi

#endif
