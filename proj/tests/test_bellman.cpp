#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <hjbqvi/bellman.hpp>
#include <hjbqvi/impulse.hpp>
#include <hjbqvi/property_checks.hpp>

using namespace hjbqvi;

namespace {

// Bellman problem with one fixed control per row: A = I, b given.
BellmanProblem identity_problem(std::vector<double> b) {
	BellmanProblem p;
	p.size = b.size();
	p.control_count = [](std::size_t) { return std::size_t{1}; };
	p.row = [b = std::move(b)](std::size_t i, std::size_t, SparseRowBuffer &buf) {
		buf.add(i, 1.);
		return b[i];
	};
	return p;
}

// Pure-continuation value iteration, run to its fixed point.
std::vector<double> value_iteration_oracle(const MdpSpec &spec, std::size_t sweeps = 100000) {
	const std::size_t n = spec.states.size();
	std::vector<double> v(n, 0.), next(n);
	for(std::size_t s = 0; s < sweeps; ++s) {
		for(std::size_t i = 0; i < n; ++i) {
			double best = -1e300;
			for(std::size_t w = 0; w < spec.states[i].w_rows.size(); ++w) {
				double lv = 0.;
				for(std::size_t j = 0; j < n; ++j)
					lv += spec.states[i].w_rows[w][j] * v[j];
				best = std::max(best,
						spec.states[i].w_costs[w] + lv / (1. + spec.rho));
			}
			next[i] = best;
		}
		double change = 0.;
		for(std::size_t i = 0; i < n; ++i)
			change = std::max(change, std::abs(next[i] - v[i]));
		v = next;
		if(change < 1e-14) break;
	}
	return v;
}

MdpSpec two_state_two_control() {
	MdpSpec spec;
	spec.rho = 0.2;
	spec.states.resize(2);
	spec.states[0].w_rows = {{0.7, 0.3}, {0.2, 0.8}};
	spec.states[0].w_costs = {1., 0.5};
	spec.states[0].allow_impulse = false;
	spec.states[1].w_rows = {{0.5, 0.5}, {0.9, 0.1}};
	spec.states[1].w_costs = {-0.25, 0.75};
	spec.states[1].allow_impulse = false;
	return spec;
}

} // namespace

TEST_CASE("policy iteration on singleton control sets") {
	std::vector<double> b{3., -1., 0.5};
	auto [v, stats] = policy_iteration(identity_problem(b), {0., 0., 0.});
	REQUIRE(stats.iterations == 1);
	REQUIRE(v == b);
	REQUIRE(stats.residual_history.size() == stats.iterations);
}

TEST_CASE("exact ties resolve to the lowest enumeration index") {
	BellmanProblem p;
	p.size = 1;
	p.control_count = [](std::size_t) { return std::size_t{3}; };
	p.row = [](std::size_t i, std::size_t k, SparseRowBuffer &buf) {
		buf.add(i, 1.);
		return k == 1 ? 5. : 5.; // all controls identical
	};
	auto policy = improve_policy(p, std::vector<double>{0.});
	REQUIRE(policy[0] == 0);
}

TEST_CASE("random contractive MDPs match the enumeration oracle") {
	auto res = check_bellman_suite(0xbe11, 60);
	for(const auto &m : res.messages) UNSCOPED_INFO(m);
	REQUIRE(res.failures == 0);
}

TEST_CASE("brute force") {
	SECTION("singleton control set solves the single system") {
		auto v = brute_force_bellman(identity_problem({2., -4.}));
		REQUIRE(v == std::vector<double>{2., -4.});
	}
	SECTION("agrees with value iteration on a 2-state MDP") {
		auto spec = two_state_two_control();
		auto v = brute_force_bellman(to_bellman(build_mdp(spec)));
		auto vi = value_iteration_oracle(spec);
		REQUIRE(v[0] == Catch::Approx(vi[0]).margin(1e-8));
		REQUIRE(v[1] == Catch::Approx(vi[1]).margin(1e-8));
	}
	SECTION("signals when no policy solves the problem") {
		BellmanProblem p;
		p.size = 1;
		p.control_count = [](std::size_t) { return std::size_t{1}; };
		p.row = [](std::size_t, std::size_t, SparseRowBuffer &) {
			return 1.; // empty row, b != 0: singular for the only policy
		};
		REQUIRE_THROWS(brute_force_bellman(p));
	}
}

TEST_CASE("epsilon policy iteration") {
	std::mt19937_64 rng(0xabcd);
	auto spec = prop::random_safe_mdp(rng, 3, 3);
	auto bp = to_bellman(build_mdp(spec));
	PiOptions exact_opt;
	exact_opt.tol = 1e-9;
	exact_opt.maxit = 400;
	auto [v_exact, st_exact] = policy_iteration(bp, std::vector<double>(bp.size, 0.),
			exact_opt);
	REQUIRE(st_exact.termination != PiTermination::singular_matrix);

	SECTION("exact argmax mode reproduces policy iteration") {
		auto [v, st] = epsilon_policy_iteration(bp, std::vector<double>(bp.size, 0.),
				EpsSchedule{}, exact_opt);
		REQUIRE(st.iterations == st_exact.iterations);
		REQUIRE(v == v_exact);
	}

	SECTION("adversarial in-tolerance picks still converge") {
		// pick the worst admissible control each round
		RelaxedPicker worst = [](std::size_t, std::span<const double> values,
				index_t exact, double eps) {
			index_t pick = exact;
			double low = values[exact];
			for(std::size_t k = 0; k < values.size(); ++k)
				if(values[k] >= values[exact] - eps && values[k] <= low) {
					low = values[k];
					pick = static_cast<index_t>(k);
				}
			return pick;
		};
		PiOptions opt = exact_opt;
		opt.tol = 1e-9;
		auto [v, st] = epsilon_policy_iteration(bp, std::vector<double>(bp.size, 0.),
				EpsSchedule{1e-3}, opt, worst);
		REQUIRE(st.termination == PiTermination::tolerance);
		double diff = 0.;
		for(std::size_t i = 0; i < v.size(); ++i)
			diff = std::max(diff, std::abs(v[i] - v_exact[i]));
		REQUIRE(diff <= 1e-6);
	}

	SECTION("monotonicity defect is bounded by the inverse bound times eps") {
		// C = max over global policies of the inverse infinity norm
		double inverse_bound = 0.;
		{
			std::vector<std::size_t> counts(bp.size);
			for(std::size_t i = 0; i < bp.size; ++i) counts[i] = bp.control_count(i);
			Policy policy(bp.size, 0);
			SparseRowBuffer buf;
			for(;;) {
				DenseMatrix a(bp.size);
				for(std::size_t i = 0; i < bp.size; ++i) {
					buf.clear();
					bp.row(i, policy[i], buf);
					buf.finalize();
					for(const auto &[c, val] : buf.entries()) a(i, c) = val;
				}
				if(auto lu = DenseLu::factor(std::move(a)))
					inverse_bound = std::max(inverse_bound,
							lu->inverse().inf_norm());
				std::size_t d = 0;
				while(d < bp.size) {
					if(++policy[d] < counts[d]) break;
					policy[d] = 0;
					++d;
				}
				if(d == bp.size) break;
			}
		}

		const double eps0 = 1e-3;
		EpsSchedule sched{eps0};
		RelaxedPicker last_ok = [](std::size_t, std::span<const double> values,
				index_t exact, double eps) {
			for(std::size_t k = values.size(); k-- > 0;)
				if(values[k] >= values[exact] - eps)
					return static_cast<index_t>(k);
			return exact;
		};
		PiOptions opt = exact_opt;
		std::vector<std::vector<double>> iterates;
		opt.observer = [&iterates](std::size_t, std::span<const double> v) {
			iterates.emplace_back(v.begin(), v.end());
		};
		epsilon_policy_iteration(bp, std::vector<double>(bp.size, 0.), sched, opt,
				last_ok);
		for(std::size_t ell = 2; ell <= iterates.size(); ++ell) {
			const double eps_ell = sched(ell);
			double defect = 0.;
			for(std::size_t i = 0; i < bp.size; ++i)
				defect = std::min(defect,
						iterates[ell - 1][i] - iterates[ell - 2][i]);
			REQUIRE(defect >= -inverse_bound * eps_ell - 1e-12);
		}
	}
}
