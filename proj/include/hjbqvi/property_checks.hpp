#ifndef HJBQVI_PROPERTY_CHECKS_HPP
#define HJBQVI_PROPERTY_CHECKS_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bellman.hpp"
#include "impulse.hpp"
#include "matrix_analysis.hpp"

namespace hjbqvi {

struct SuiteResult {
	std::size_t cases = 0;
	std::size_t failures = 0;
	std::vector<std::string> messages;

	bool ok() const { return failures == 0; }

	void fail(std::string msg) {
		++failures;
		if(messages.size() < 20) messages.push_back(std::move(msg));
	}
};

namespace prop {

/// Random WDD Z-matrix with positive diagonals.  Entries are dyadic
/// (multiples of 1/16) so row slacks are exact in floating point; rows are
/// SDD with the given probability.
inline SparseMatrix random_wdd_z_matrix(std::mt19937_64 &rng, std::size_t n,
		double sdd_prob = 0.4) {
	std::uniform_int_distribution<std::size_t> ncols(0, std::min<std::size_t>(3, n - 1));
	std::uniform_int_distribution<int> mag(1, 8);
	std::uniform_real_distribution<double> unit(0., 1.);
	std::vector<Triplet> t;
	for(std::size_t i = 0; i < n; ++i) {
		std::size_t k = ncols(rng);
		double off_sum = 0.;
		std::vector<char> used(n, 0);
		used[i] = 1;
		for(std::size_t q = 0; q < k; ++q) {
			std::uniform_int_distribution<std::size_t> pick(0, n - 1);
			std::size_t j = pick(rng);
			if(used[j]) continue;
			used[j] = 1;
			const double v = mag(rng) / 16.;
			off_sum += v;
			t.push_back({i, j, -v});
		}
		double slack = 0.;
		if(off_sum == 0. || unit(rng) < sdd_prob) slack = mag(rng) / 16.;
		t.push_back({i, i, off_sum + slack});
	}
	return SparseMatrix::from_triplets(n, std::move(t));
}

/// Random WDD matrix with mixed-sign off-diagonals (dyadic entries).
inline SparseMatrix random_wdd_matrix(std::mt19937_64 &rng, std::size_t n) {
	std::uniform_int_distribution<std::size_t> ncols(0, std::min<std::size_t>(4, n - 1));
	std::uniform_int_distribution<int> mag(1, 8);
	std::uniform_int_distribution<int> coin(0, 1);
	std::uniform_real_distribution<double> unit(0., 1.);
	std::vector<Triplet> t;
	for(std::size_t i = 0; i < n; ++i) {
		std::size_t k = ncols(rng);
		double off_sum = 0.;
		std::vector<char> used(n, 0);
		used[i] = 1;
		for(std::size_t q = 0; q < k; ++q) {
			std::uniform_int_distribution<std::size_t> pick(0, n - 1);
			std::size_t j = pick(rng);
			if(used[j]) continue;
			used[j] = 1;
			const double v = mag(rng) / 16.;
			off_sum += v;
			t.push_back({i, j, coin(rng) ? v : -v});
		}
		double slack = 0.;
		if(off_sum == 0. || unit(rng) < 0.5) slack = mag(rng) / 16.;
		t.push_back({i, i, (coin(rng) ? 1. : -1.) * (off_sum + slack)});
	}
	return SparseMatrix::from_triplets(n, std::move(t));
}

inline SparseMatrix permute_symmetrically(const SparseMatrix &a,
		const std::vector<std::size_t> &perm) {
	std::vector<Triplet> t;
	for(std::size_t i = 0; i < a.size(); ++i) {
		auto cols = a.row_cols(i);
		auto vals = a.row_vals(i);
		for(std::size_t k = 0; k < cols.size(); ++k)
			t.push_back({perm[i], perm[cols[k]], vals[k]});
	}
	return SparseMatrix::from_triplets(a.size(), std::move(t));
}

/// Random MDP whose every admissible policy yields a weakly chained matrix:
/// continuation everywhere, plus (sometimes) strictly-down impulse jumps
/// with state 0 restricted to continuation.
inline MdpSpec random_safe_mdp(std::mt19937_64 &rng, std::size_t max_states = 5,
		std::size_t max_controls = 4) {
	std::uniform_int_distribution<std::size_t> nstates(2, max_states);
	std::uniform_real_distribution<double> rho_dist(0.05, 1.);
	std::uniform_real_distribution<double> cost(-2., 2.);
	std::uniform_real_distribution<double> unit(0., 1.);
	const std::size_t n = nstates(rng);
	const bool with_impulse = unit(rng) < 0.3;

	MdpSpec spec;
	spec.rho = rho_dist(rng);
	spec.states.resize(n);
	for(std::size_t i = 0; i < n; ++i) {
		auto &s = spec.states[i];
		const std::size_t total = 1 + static_cast<std::size_t>(
				unit(rng) * static_cast<double>(max_controls - 1));
		std::size_t nz = 0;
		if(with_impulse && i > 0 && total > 1)
			nz = 1 + static_cast<std::size_t>(unit(rng)
					* static_cast<double>(std::min<std::size_t>(total - 1, i)));
		const std::size_t nw = total - nz;
		for(std::size_t q = 0; q < nw; ++q) {
			std::vector<double> row(n);
			double sum = 0.;
			for(auto &x : row) sum += (x = unit(rng) + 1e-3);
			for(auto &x : row) x /= sum;
			s.w_rows.push_back(std::move(row));
			s.w_costs.push_back(cost(rng));
		}
		if(nz == 0) {
			s.allow_impulse = false;
		} else {
			// strictly-down jumps keep every policy chained to state 0
			for(std::size_t q = 0; q < nz; ++q) {
				std::uniform_int_distribution<std::size_t> tgt(0, i - 1);
				std::vector<double> row(n, 0.);
				row[tgt(rng)] = 1.;
				s.z_rows.push_back(std::move(row));
				s.z_costs.push_back(cost(rng) - 0.5);
			}
		}
	}
	return spec;
}

} // namespace prop

/// Characterization and nonsingularity checks for the weakly-chained class.
inline SuiteResult check_wcdd_suite(std::uint64_t seed, std::size_t cases) {
	SuiteResult res;
	std::mt19937_64 rng(seed);
	std::uniform_int_distribution<std::size_t> size_dist(1, 8);

	// Tightness: monotone but not weakly chained.
	{
		++res.cases;
		auto a = SparseMatrix::from_triplets(2, {{0, 0, 1.}, {0, 1, -2.}, {1, 1, 1.}});
		const bool mono = monotonicity_oracle(a) == MonotonicityVerdict::monotone;
		if(!mono || is_wcdd(a))
			res.fail("counterexample [[1,-2],[0,1]] misclassified");
	}

	for(std::size_t c = 0; c < cases; ++c) {
		++res.cases;
		const std::size_t n = size_dist(rng);
		auto a = prop::random_wdd_z_matrix(rng, n);
		auto rep = analyze_wcdd(a);
		const auto verdict = monotonicity_oracle(a);
		if(rep.is_wcdd != (verdict == MonotonicityVerdict::monotone)) {
			res.fail("wcdd/monotone mismatch, case " + std::to_string(c));
			continue;
		}
		if(!rep.is_wcdd && verdict != MonotonicityVerdict::singular) {
			res.fail("non-chained WDD Z-matrix not singular, case " + std::to_string(c));
			continue;
		}
		if(rep.is_wcdd) {
			// witness paths follow graph edges and end at an SDD row
			for(std::size_t i = 0; i < n; ++i) {
				auto path = rep.witness_path(i);
				if(path.empty() || path.front() != i
						|| rep.dominance.label[path.back()] != RowLabel::sdd) {
					res.fail("bad witness path, case " + std::to_string(c));
					break;
				}
				for(std::size_t q = 0; q + 1 < path.size(); ++q)
					if(a.coeff(path[q], path[q + 1]) == 0.) {
						res.fail("witness path leaves the graph, case "
								+ std::to_string(c));
						break;
					}
			}
		}
		// invariance under simultaneous row/column permutation
		std::vector<std::size_t> perm(n);
		for(std::size_t i = 0; i < n; ++i) perm[i] = i;
		std::shuffle(perm.begin(), perm.end(), rng);
		if(is_wcdd(prop::permute_symmetrically(a, perm)) != rep.is_wcdd)
			res.fail("wcdd not permutation invariant, case " + std::to_string(c));
	}

	// Every WCDD matrix (mixed signs allowed) is nonsingular.
	std::uniform_int_distribution<std::size_t> size12(1, 12);
	for(std::size_t c = 0; c < cases / 2; ++c) {
		++res.cases;
		auto a = prop::random_wdd_matrix(rng, size12(rng));
		if(is_wcdd(a) && !DenseLu::factor(DenseMatrix::from_sparse(a)))
			res.fail("WCDD matrix reported singular, case " + std::to_string(c));
	}
	return res;
}

/// Policy iteration against the enumeration oracle on random MDPs, with the
/// monotone-iterate and finite-termination properties.
inline SuiteResult check_bellman_suite(std::uint64_t seed, std::size_t cases) {
	SuiteResult res;
	std::mt19937_64 rng(seed);

	for(std::size_t c = 0; c < cases; ++c) {
		++res.cases;
		auto spec = prop::random_safe_mdp(rng);
		auto problem = build_mdp(spec);
		auto bp = to_bellman(problem);

		double combos = 1.;
		for(std::size_t i = 0; i < bp.size; ++i)
			combos *= static_cast<double>(bp.control_count(i));

		std::vector<double> oracle;
		try {
			oracle = brute_force_bellman(bp);
		} catch(const std::exception &e) {
			res.fail(std::string("oracle failed: ") + e.what());
			continue;
		}

		PiOptions opt;
		opt.tol = 1e-10;
		opt.maxit = 400;
		auto [v, stats] = policy_iteration(bp, std::vector<double>(bp.size, 0.), opt);
		if(stats.termination == PiTermination::singular_matrix) {
			res.fail("unexpected singular matrix, case " + std::to_string(c));
			continue;
		}
		double diff = 0.;
		for(std::size_t i = 0; i < v.size(); ++i)
			diff = std::max(diff, std::abs(v[i] - oracle[i]));
		if(diff > 1e-7)
			res.fail("policy iteration disagrees with oracle by "
					+ std::to_string(diff) + ", case " + std::to_string(c));
		if(static_cast<double>(stats.iterations) > combos + 1.)
			res.fail("termination bound exceeded, case " + std::to_string(c));

		// iterates are nondecreasing from the second round on
		std::vector<double> prev(bp.size, 0.);
		bool first = true;
		std::vector<double> u(bp.size, 0.);
		PiOptions step_opt = opt;
		step_opt.maxit = 1;
		for(std::size_t ell = 0; ell < stats.iterations; ++ell) {
			auto [next, st] = policy_iteration(bp, u, step_opt);
			if(st.iterations == 0) break;
			if(!first) {
				for(std::size_t i = 0; i < u.size(); ++i)
					if(next[i] < u[i] - 1e-9) {
						res.fail("iterates not nondecreasing, case "
								+ std::to_string(c));
						ell = stats.iterations;
						break;
					}
			}
			prev = u;
			u = next;
			first = false;
		}
	}
	return res;
}

} // namespace hjbqvi

#endif
