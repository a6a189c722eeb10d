#include <catch2/catch_amalgamated.hpp>

#include <random>

#include <hjbqvi/impulse.hpp>
#include <hjbqvi/property_checks.hpp>

using namespace hjbqvi;

namespace {

// Two-state toy with one control per branch, explicit rows.
ImpulseControlProblem toy_problem(double delta = 1.) {
	ImpulseControlProblem p;
	p.n = 2;
	p.delta = delta;
	p.w_counts = {1, 1};
	p.z_counts = {1, 1};
	p.d_sets = {{true, true}, {true, true}};
	p.continuation = [](std::size_t i, std::size_t, SparseRowBuffer &buf) {
		buf.add(i, 0.5);
		return i == 0 ? 1. : -1.;
	};
	p.impulse = [](std::size_t i, std::size_t, SparseRowBuffer &buf) {
		buf.add(1 - i, 0.75);
		return -0.25;
	};
	return p;
}

Policy constant_policy(const ImpulseControlProblem &p, bool impulse) {
	Policy policy(p.n);
	for(std::size_t i = 0; i < p.n; ++i)
		policy[i] = static_cast<index_t>(impulse ? p.cont_count(i) : 0);
	return policy;
}

MdpSpec two_state_round_trip_spec() {
	MdpSpec spec;
	spec.rho = 0.25;
	spec.states.resize(2);
	spec.states[0].w_rows = {{0.5, 0.5}};
	spec.states[0].w_costs = {1.5};
	spec.states[0].allow_impulse = false;
	spec.states[1].w_rows = {{0.125, 0.875}};
	spec.states[1].w_costs = {-2.};
	spec.states[1].z_rows = {{1., 0.}};
	spec.states[1].z_costs = {-0.5};
	return spec;
}

} // namespace

TEST_CASE("assembly branches") {
	SECTION("all-continuation policy gives I - L and c") {
		auto p = toy_problem();
		auto [a, b] = assemble(p, constant_policy(p, false));
		REQUIRE(a.coeff(0, 0) == 0.5); // 1 - 0.5
		REQUIRE(a.coeff(1, 1) == 0.5);
		REQUIRE(a.coeff(0, 1) == 0.);
		REQUIRE(b == std::vector<double>{1., -1.});
	}
	SECTION("all-impulse policy at delta = 2 gives 2(I - B) and 2k") {
		auto p = toy_problem(2.);
		auto [a, b] = assemble(p, constant_policy(p, true));
		REQUIRE(a.coeff(0, 0) == 2.);
		REQUIRE(a.coeff(0, 1) == -1.5); // -2 * 0.75
		REQUIRE(b == std::vector<double>{-0.5, -0.5});
	}
	SECTION("impulse row whose target is the state itself cancels to zero") {
		ImpulseControlProblem p = toy_problem();
		p.impulse = [](std::size_t i, std::size_t, SparseRowBuffer &buf) {
			buf.add(i, 1.); // self-transition
			return -0.1;
		};
		auto [a, b] = assemble(p, constant_policy(p, true));
		REQUIRE(a.row_cols(0).empty());
		REQUIRE(a.row_cols(1).empty());
	}
}

TEST_CASE("policy iteration failure instance") {
	const std::size_t m = 4;
	auto p = mdp_policy_iteration_failure(m);
	const std::size_t r = m / 2;

	SECTION("first improvement from zero picks the self-jump at the cheap state") {
		auto bp = to_bellman(p);
		auto policy = improve_policy(bp, std::vector<double>(m, 0.));
		auto choice = decode_control(p, r, policy[r]);
		REQUIRE(choice.impulse);
		REQUIRE(choice.index == r); // z = e^r
		// elsewhere the continuation cost 1 beats every impulse value
		for(std::size_t i = 0; i < m; ++i) {
			if(i == r) continue;
			REQUIRE_FALSE(decode_control(p, i, policy[i]).impulse);
		}
	}

	SECTION("solve reports a singular matrix at the first iteration") {
		auto [v, stats] = solve_impulse(p, std::vector<double>(m, 0.));
		REQUIRE(stats.termination == PiTermination::singular_matrix);
		REQUIRE(stats.failure_iteration == 1);
		REQUIRE(stats.failure_diagnosis.zero_row);
		REQUIRE(stats.failure_diagnosis.row == r);
	}
}

TEST_CASE("chained instances converge under the guard") {
	for(auto *make : {&mdp_unidirectional_chain, &mdp_one_hop}) {
		auto p = (*make)(6, 0.1, 0.1);
		auto [v, stats] = solve_impulse(p, std::vector<double>(6, 0.));
		REQUIRE((stats.termination == PiTermination::tolerance
				|| stats.termination == PiTermination::policy_repeat));
		// final policy's matrix is weakly chained
		auto [a, b] = assemble(p, stats.final_policy);
		REQUIRE(is_wcdd(a));
	}
}

TEST_CASE("modified problem rescues the failure instance") {
	const std::size_t m = 5;
	auto pair = mdp_modified_problem(m);

	auto [v, stats] = solve_impulse(pair.restricted, std::vector<double>(m, 0.));
	REQUIRE((stats.termination == PiTermination::tolerance
			|| stats.termination == PiTermination::policy_repeat));

	SECTION("solution is nonincreasing across states") {
		for(std::size_t i = 1; i < m; ++i) REQUIRE(v[i] <= v[i - 1] + 1e-9);
	}
	SECTION("certificate over the full control set") {
		REQUIRE(verify_original(pair.original, v, 1e-6));
		auto perturbed = v;
		perturbed[2] += 0.1;
		REQUIRE_FALSE(verify_original(pair.original, perturbed, 1e-6));
	}
	SECTION("matches the enumeration oracle on the original problem") {
		auto small = mdp_modified_problem(4);
		auto [vs, st] = solve_impulse(small.restricted, std::vector<double>(4, 0.));
		auto oracle = brute_force_bellman(to_bellman(small.original));
		for(std::size_t i = 0; i < 4; ++i)
			REQUIRE(vs[i] == Catch::Approx(oracle[i]).margin(1e-7));
	}
	SECTION("uniqueness probe: independent starts land on the same solution") {
		std::mt19937_64 rng(99);
		std::uniform_real_distribution<double> noise(-1., 1.);
		auto v0 = v;
		for(auto &x : v0) x += noise(rng);
		auto [v2, st2] = solve_impulse(pair.restricted, std::move(v0));
		for(std::size_t i = 0; i < m; ++i)
			REQUIRE(v2[i] == Catch::Approx(v[i]).margin(5e-6));
	}
}

TEST_CASE("restriction") {
	auto p = toy_problem();
	SECTION("keep-everything restriction behaves identically") {
		auto r = restrict_controls(p,
				[](std::size_t, int, std::size_t) { return true; });
		auto [a1, b1] = assemble(p, constant_policy(p, true));
		auto [a2, b2] = assemble(r, constant_policy(r, true));
		REQUIRE(a1.to_coordinate_text() == a2.to_coordinate_text());
		REQUIRE(b1 == b2);
	}
	SECTION("emptying a state's controls is an error") {
		REQUIRE_THROWS_AS(restrict_controls(p,
				[](std::size_t i, int, std::size_t) { return i != 0; }),
				std::invalid_argument);
	}
	SECTION("dropping one branch flips the D set") {
		auto r = restrict_controls(p,
				[](std::size_t, int psi, std::size_t) { return psi == 0; });
		REQUIRE(r.cont_count(0) == 1);
		REQUIRE(r.imp_count(0) == 0);
	}
}

TEST_CASE("subidempotence probe") {
	SECTION("fixed negative cost: witness within two applications everywhere") {
		// stochastic impulse rows, shared cost -C
		MdpSpec spec;
		spec.rho = 0.1;
		spec.states.resize(3);
		std::vector<std::vector<double>> zrows{
				{0., 1., 0.}, {0.5, 0., 0.5}, {1., 0., 0.}};
		for(std::size_t i = 0; i < 3; ++i) {
			auto &s = spec.states[i];
			s.w_rows = {{1. / 3, 1. / 3, 1. / 3}};
			s.w_costs = {0.5};
			s.z_rows = zrows;
			s.z_costs = {-1., -1., -1.};
		}
		auto p = build_mdp(spec);
		std::vector<double> v{0., -10., -20.};
		auto witnesses = check_subidempotence(p, v, 8);
		// the pair (1, 2) certifies the property for any v; the first
		// reported witness can only be (0,1) or (1,2)
		auto b1 = apply_impulse_operator(p, v);
		auto b2 = apply_impulse_operator(p, b1);
		for(std::size_t i = 0; i < 3; ++i) {
			REQUIRE(b2[i] < b1[i]);
			REQUIRE(witnesses[i].has_value());
			REQUIRE(witnesses[i]->second <= 2);
		}
	}
	SECTION("zero cost and identity transitions: no witness anywhere") {
		ImpulseControlProblem p = toy_problem();
		p.impulse = [](std::size_t i, std::size_t, SparseRowBuffer &buf) {
			buf.add(i, 1.);
			return 0.;
		};
		std::vector<double> v{1., 2.};
		auto witnesses = check_subidempotence(p, v, 8);
		REQUIRE_FALSE(witnesses[0].has_value());
		REQUIRE_FALSE(witnesses[1].has_value());
	}
	SECTION("states without impulses witness immediately") {
		auto p = mdp_unidirectional_chain(3);
		std::vector<double> v{1., 1., 1.};
		auto witnesses = check_subidempotence(p, v, 4);
		REQUIRE(witnesses[0].has_value()); // B v = -inf < v at state 0
	}
}

TEST_CASE("delta rescaling") {
	SECTION("rescaling to the same delta is an exact no-op") {
		auto p = toy_problem(1.);
		auto q = delta_rescale(p, 1.);
		auto [a1, b1] = assemble(p, constant_policy(p, true));
		auto [a2, b2] = assemble(q, constant_policy(q, true));
		REQUIRE(a1.to_coordinate_text() == a2.to_coordinate_text());
		REQUIRE(b1 == b2);
	}
	SECTION("one-state impulse-only value is delta independent") {
		for(double delta : {1., 7., 1024.}) {
			ImpulseControlProblem p;
			p.n = 1;
			p.delta = delta;
			p.w_counts = {0};
			p.z_counts = {1};
			p.d_sets = {{false, true}};
			p.impulse = [](std::size_t, std::size_t, SparseRowBuffer &buf) {
				buf.add(0, 0.5);
				return 1.;
			};
			ImpulseSolveOptions opt;
			opt.check_structure = false; // continuation branch absent
			auto [v, st] = solve_impulse(p, {0.}, opt);
			REQUIRE(v[0] == Catch::Approx(2.).margin(1e-9));
		}
	}
	SECTION("residual certificate transfers between deltas") {
		std::mt19937_64 rng(1234);
		auto spec = prop::random_safe_mdp(rng);
		auto p = build_mdp(spec);
		auto bp = to_bellman(p);
		PiOptions opt;
		opt.tol = 1e-10;
		auto [v, st] = policy_iteration(bp, std::vector<double>(p.n, 0.), opt);
		REQUIRE(st.termination != PiTermination::singular_matrix);
		const double delta2 = 8.;
		REQUIRE(verify_original(delta_rescale(p, delta2), v, delta2 * 1e-8));
	}
}

TEST_CASE("mdp construction and text format") {
	SECTION("one-state closed form") {
		MdpSpec spec;
		spec.rho = 1.;
		spec.states.resize(1);
		spec.states[0].w_rows = {{1.}};
		spec.states[0].w_costs = {1.};
		spec.states[0].allow_impulse = false;
		auto [v, st] = solve_impulse(build_mdp(spec), {0.});
		REQUIRE(v[0] == Catch::Approx(2.).margin(1e-9)); // v = v/2 + 1
	}
	SECTION("invalid probability rows are rejected") {
		MdpSpec spec;
		spec.rho = 0.5;
		spec.states.resize(1);
		spec.states[0].w_rows = {{0.5}};
		spec.states[0].w_costs = {0.};
		spec.states[0].allow_impulse = false;
		REQUIRE_THROWS_AS(build_mdp(spec), std::invalid_argument);
	}
	SECTION("H3 holds on generated instances") {
		std::mt19937_64 rng(31);
		for(int c = 0; c < 20; ++c) {
			auto p = build_mdp(prop::random_safe_mdp(rng));
			REQUIRE(check_h3(p).ok);
		}
	}
	SECTION("text round-trip") {
		auto spec = two_state_round_trip_spec();
		auto text = format_mdp_spec(spec);
		auto parsed = parse_mdp_spec(text);
		REQUIRE(format_mdp_spec(parsed) == text);
	}
	SECTION("unknown keys rejected") {
		REQUIRE_THROWS_AS(parse_mdp_spec(std::string("states 1\nbogus 3\n")),
				std::invalid_argument);
	}
}
