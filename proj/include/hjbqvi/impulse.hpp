#ifndef HJBQVI_IMPULSE_HPP
#define HJBQVI_IMPULSE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bellman.hpp"

namespace hjbqvi {

/// Nonempty subset of {0, 1}: which branches (continue / impulse) a state
/// may select.
struct DSet {
	bool allow_continue = true;
	bool allow_impulse = true;
};

/// Data of the impulse fixed-point problem: row i of the system under
/// control (w, z, psi) is the continuation row (I - L(w)) with entry c(w)
/// when psi = 0, and delta * ((I - B(z)) row) with entry delta * k(z) when
/// psi = 1.
///
/// continuation() fills the L(w) row and returns c_i(w); impulse() fills the
/// B(z) row and returns k_i(z).  The optional batch evaluators compute, for
/// every control of one state, the residual values
///     out[w] = c_i(w) + [L(w)v]_i - v_i        (continuation_values)
///     out[z] = k_i(z) + [B(z)v]_i - v_i        (impulse_values, unscaled)
/// so that grid-sized problems can keep the per-control loop free of
/// per-call indirection.  They must agree with the row evaluators.
struct ImpulseControlProblem {
	std::size_t n = 0;
	double delta = 1.;
	std::vector<std::size_t> w_counts;
	std::vector<std::size_t> z_counts;
	std::vector<DSet> d_sets;

	std::function<double(std::size_t i, std::size_t w, SparseRowBuffer &)> continuation;
	std::function<double(std::size_t i, std::size_t z, SparseRowBuffer &)> impulse;

	std::function<void(std::size_t i, std::span<const double> v, std::span<double> out)>
			continuation_values;
	std::function<void(std::size_t i, std::span<const double> v, std::span<double> out)>
			impulse_values;

	std::size_t cont_count(std::size_t i) const {
		return d_sets[i].allow_continue ? w_counts[i] : 0;
	}
	std::size_t imp_count(std::size_t i) const {
		return d_sets[i].allow_impulse ? z_counts[i] : 0;
	}
	std::size_t control_count(std::size_t i) const {
		return cont_count(i) + imp_count(i);
	}
};

/// Decoded per-state control: branch plus index into the state's W or Z list.
struct ControlChoice {
	bool impulse = false; // psi
	std::size_t index = 0;
};

inline ControlChoice decode_control(const ImpulseControlProblem &p, std::size_t i, index_t id) {
	const std::size_t nc = p.cont_count(i);
	if(id < nc) return {false, id};
	return {true, id - nc};
}

namespace detail {

inline void eval_cont_values(const ImpulseControlProblem &p, std::size_t i,
		std::span<const double> v, std::span<double> out) {
	if(p.continuation_values) {
		p.continuation_values(i, v, out);
		return;
	}
	thread_local SparseRowBuffer buf;
	for(std::size_t w = 0; w < out.size(); ++w) {
		buf.clear();
		const double c = p.continuation(i, w, buf);
		double lv = 0.;
		for(const auto &[col, val] : buf.entries()) lv += val * v[col];
		out[w] = c + lv - v[i];
	}
}

inline void eval_imp_values(const ImpulseControlProblem &p, std::size_t i,
		std::span<const double> v, std::span<double> out) {
	if(p.impulse_values) {
		p.impulse_values(i, v, out);
		return;
	}
	thread_local SparseRowBuffer buf;
	for(std::size_t z = 0; z < out.size(); ++z) {
		buf.clear();
		const double k = p.impulse(i, z, buf);
		double bv = 0.;
		for(const auto &[col, val] : buf.entries()) bv += val * v[col];
		out[z] = k + bv - v[i];
	}
}

} // namespace detail

/// View the impulse problem as a Bellman problem.  Control enumeration per
/// state lists the continuation branch first, so the lowest-index tie rule
/// prefers psi = 0 over psi = 1.  The returned closures hold a copy of the
/// problem data; delta is baked in.
inline BellmanProblem to_bellman(const ImpulseControlProblem &problem) {
	for(std::size_t i = 0; i < problem.n; ++i) {
		if(problem.control_count(i) == 0)
			throw std::invalid_argument("impulse: state " + std::to_string(i)
					+ " has an empty control set");
	}
	auto p = std::make_shared<const ImpulseControlProblem>(problem);

	BellmanProblem b;
	b.size = p->n;
	b.control_count = [p](std::size_t i) { return p->control_count(i); };
	b.row = [p](std::size_t i, std::size_t id, SparseRowBuffer &buf) -> double {
		thread_local SparseRowBuffer scratch;
		scratch.clear();
		const auto choice = decode_control(*p, i, static_cast<index_t>(id));
		if(!choice.impulse) {
			const double c = p->continuation(i, choice.index, scratch);
			buf.add(i, 1.);
			for(const auto &[col, val] : scratch.entries()) buf.add(col, -val);
			return c;
		}
		const double k = p->impulse(i, choice.index, scratch);
		const double delta = p->delta;
		buf.add(i, delta);
		for(const auto &[col, val] : scratch.entries()) buf.add(col, -delta * val);
		return delta * k;
	};
	b.best_control = [p](std::size_t i, std::span<const double> v) -> index_t {
		thread_local std::vector<double> wvals, zvals;
		const std::size_t nc = p->cont_count(i);
		const std::size_t ni = p->imp_count(i);
		index_t best_id = 0;
		double best = -std::numeric_limits<double>::infinity();
		if(nc > 0) {
			wvals.resize(nc);
			detail::eval_cont_values(*p, i, v, wvals);
			for(std::size_t k = 0; k < nc; ++k) {
				if(wvals[k] > best) {
					best = wvals[k];
					best_id = static_cast<index_t>(k);
				}
			}
		}
		if(ni > 0) {
			zvals.resize(ni);
			detail::eval_imp_values(*p, i, v, zvals);
			for(std::size_t k = 0; k < ni; ++k) {
				const double val = p->delta * zvals[k];
				if(val > best) {
					best = val;
					best_id = static_cast<index_t>(nc + k);
				}
			}
		}
		return best_id;
	};
	return b;
}

/// A(P), b(P) for one policy (bellman control ids per state).
inline std::pair<SparseMatrix, std::vector<double>> assemble(const ImpulseControlProblem &p,
		const Policy &policy, std::size_t threads = 1) {
	return assemble_policy(to_bellman(p), policy, threads);
}

struct H3Report {
	bool ok = true;
	std::string what;
};

/// Structural check: for every w, I - L(w) is an SDD Z-matrix with positive
/// diagonals; for every z, I - B(z) is a WDD Z-matrix with 0 <= B_ii <= 1.
inline H3Report check_h3(const ImpulseControlProblem &p) {
	SparseRowBuffer buf;
	auto fail = [](std::string msg) { return H3Report{false, std::move(msg)}; };
	for(std::size_t i = 0; i < p.n; ++i) {
		for(std::size_t w = 0; w < p.w_counts[i]; ++w) {
			buf.clear();
			p.continuation(i, w, buf);
			buf.finalize();
			double diag = 0., off = 0.;
			for(const auto &[col, val] : buf.entries()) {
				if(col == i) diag = val;
				else {
					if(val < -1e-14)
						return fail("L has a negative off-diagonal at state "
								+ std::to_string(i));
					off += std::abs(val);
				}
			}
			const double slack = (1. - diag) - off;
			if(!(slack > 1e-12 * (1. + std::abs(diag) + off)))
				return fail("I - L(w) row not SDD at state " + std::to_string(i));
		}
		for(std::size_t z = 0; z < p.z_counts[i]; ++z) {
			buf.clear();
			p.impulse(i, z, buf);
			buf.finalize();
			double diag = 0., off = 0.;
			for(const auto &[col, val] : buf.entries()) {
				if(col == i) diag = val;
				else {
					if(val < -1e-14)
						return fail("B has a negative off-diagonal at state "
								+ std::to_string(i));
					off += std::abs(val);
				}
			}
			const double tol = 1e-12 * (1. + std::abs(diag) + off);
			if(diag < -tol || diag > 1. + tol)
				return fail("B diagonal outside [0, 1] at state "
						+ std::to_string(i));
			if((1. - diag) - off < -tol)
				return fail("I - B(z) row not WDD at state " + std::to_string(i));
		}
	}
	return {};
}

struct ImpulseSolveOptions {
	PiOptions pi{};
	bool check_structure = true; // run check_h3 before iterating
};

/// Policy iteration over the product control set, one linear solve per
/// improvement round.  Propagates the singular-matrix outcome through
/// PiStats when the selected policy's matrix fails the WDD M-matrix guard.
inline std::pair<std::vector<double>, PiStats> solve_impulse(const ImpulseControlProblem &p,
		std::vector<double> v0, const ImpulseSolveOptions &opt = {}) {
	if(opt.check_structure) {
		auto h3 = check_h3(p);
		if(!h3.ok) throw std::invalid_argument("impulse: structural check failed: " + h3.what);
	}
	return policy_iteration(to_bellman(p), std::move(v0), opt.pi);
}

/// Predicate deciding which per-state controls survive restriction.
/// psi = 0: branch indexes the state's W list; psi = 1: its Z list.
using KeepPredicate = std::function<bool(std::size_t state, int psi, std::size_t branch)>;

/// Modified problem: same evaluators over a nonempty subset of each state's
/// control set.  Throws when the restriction empties some state.
inline ImpulseControlProblem restrict_controls(const ImpulseControlProblem &parent,
		const KeepPredicate &keep) {
	auto maps = std::make_shared<std::vector<std::vector<std::size_t>>>();
	auto zmaps = std::make_shared<std::vector<std::vector<std::size_t>>>();
	maps->resize(parent.n);
	zmaps->resize(parent.n);

	ImpulseControlProblem r;
	r.n = parent.n;
	r.delta = parent.delta;
	r.w_counts.resize(parent.n);
	r.z_counts.resize(parent.n);
	r.d_sets.resize(parent.n);
	for(std::size_t i = 0; i < parent.n; ++i) {
		auto &wm = (*maps)[i];
		auto &zm = (*zmaps)[i];
		if(parent.d_sets[i].allow_continue)
			for(std::size_t w = 0; w < parent.w_counts[i]; ++w)
				if(keep(i, 0, w)) wm.push_back(w);
		if(parent.d_sets[i].allow_impulse)
			for(std::size_t z = 0; z < parent.z_counts[i]; ++z)
				if(keep(i, 1, z)) zm.push_back(z);
		r.w_counts[i] = wm.size();
		r.z_counts[i] = zm.size();
		r.d_sets[i] = {!wm.empty(), !zm.empty()};
		if(wm.empty() && zm.empty())
			throw std::invalid_argument("restrict: empty control set at state "
					+ std::to_string(i));
	}

	auto parent_ptr = std::make_shared<const ImpulseControlProblem>(parent);
	r.continuation = [parent_ptr, maps](std::size_t i, std::size_t w, SparseRowBuffer &buf) {
		return parent_ptr->continuation(i, (*maps)[i][w], buf);
	};
	r.impulse = [parent_ptr, zmaps](std::size_t i, std::size_t z, SparseRowBuffer &buf) {
		return parent_ptr->impulse(i, (*zmaps)[i][z], buf);
	};
	if(parent.continuation_values) {
		r.continuation_values = [parent_ptr, maps](std::size_t i, std::span<const double> v,
				std::span<double> out) {
			thread_local std::vector<double> scratch;
			scratch.resize(parent_ptr->w_counts[i]);
			parent_ptr->continuation_values(i, v, scratch);
			const auto &wm = (*maps)[i];
			for(std::size_t k = 0; k < wm.size(); ++k) out[k] = scratch[wm[k]];
		};
	}
	if(parent.impulse_values) {
		r.impulse_values = [parent_ptr, zmaps](std::size_t i, std::span<const double> v,
				std::span<double> out) {
			thread_local std::vector<double> scratch;
			scratch.resize(parent_ptr->z_counts[i]);
			parent_ptr->impulse_values(i, v, scratch);
			const auto &zm = (*zmaps)[i];
			for(std::size_t k = 0; k < zm.size(); ++k) out[k] = scratch[zm[k]];
		};
	}
	return r;
}

/// Certificate that v solves the problem over the FULL control set: the
/// row-wise supremum of -A(P)v + b(P) must lie in [-tol, tol] everywhere.
inline bool verify_original(const ImpulseControlProblem &p, std::span<const double> v,
		double tol, double *worst_out = nullptr) {
	std::vector<double> wvals, zvals;
	double worst = 0.;
	bool ok = true;
	for(std::size_t i = 0; i < p.n; ++i) {
		double best = -std::numeric_limits<double>::infinity();
		if(p.w_counts[i] > 0 && p.d_sets[i].allow_continue) {
			wvals.resize(p.w_counts[i]);
			detail::eval_cont_values(p, i, v, wvals);
			for(double x : wvals) best = std::max(best, x);
		}
		if(p.z_counts[i] > 0 && p.d_sets[i].allow_impulse) {
			zvals.resize(p.z_counts[i]);
			detail::eval_imp_values(p, i, v, zvals);
			for(double x : zvals) best = std::max(best, p.delta * x);
		}
		if(std::abs(best) > std::abs(worst)) worst = best;
		if(!(best <= tol && best >= -tol)) ok = false;
	}
	if(worst_out) *worst_out = worst;
	return ok;
}

/// One application of the impulse operator: [Bv]_i = sup_z { B(z)v + k(z) },
/// -inf at states with no impulses.  Entries of v may be -inf.
inline std::vector<double> apply_impulse_operator(const ImpulseControlProblem &p,
		std::span<const double> v) {
	const double ninf = -std::numeric_limits<double>::infinity();
	std::vector<double> out(p.n, ninf);
	SparseRowBuffer buf;
	for(std::size_t i = 0; i < p.n; ++i) {
		double best = ninf;
		for(std::size_t z = 0; z < p.z_counts[i]; ++z) {
			buf.clear();
			const double k = p.impulse(i, z, buf);
			double bv = 0.;
			bool finite = true;
			for(const auto &[col, val] : buf.entries()) {
				if(val != 0. && v[col] == ninf) {
					finite = false;
					break;
				}
				bv += val * v[col];
			}
			if(finite) best = std::max(best, bv + k);
		}
		out[i] = best;
	}
	return out;
}

/// Empirical subidempotence probe: iterate the impulse operator up to
/// `horizon` times and report, per state, the first pair n < m with
/// [B^m v]_i < [B^n v]_i (m ascending, then n ascending), or nothing if no
/// pair is found within the horizon.
inline std::vector<std::optional<std::pair<std::size_t, std::size_t>>> check_subidempotence(
		const ImpulseControlProblem &p, std::span<const double> v, std::size_t horizon = 8) {
	if(horizon < 2) throw std::invalid_argument("check_subidempotence: horizon >= 2 required");
	std::vector<std::vector<double>> powers;
	powers.emplace_back(v.begin(), v.end());
	for(std::size_t m = 1; m <= horizon; ++m)
		powers.push_back(apply_impulse_operator(p, powers.back()));

	std::vector<std::optional<std::pair<std::size_t, std::size_t>>> result(p.n);
	for(std::size_t i = 0; i < p.n; ++i) {
		for(std::size_t m = 1; m <= horizon && !result[i]; ++m)
			for(std::size_t n = 0; n < m; ++n)
				if(powers[m][i] < powers[n][i]) {
					result[i] = std::make_pair(n, m);
					break;
				}
	}
	return result;
}

/// Identical data with the scaling factor replaced.
inline ImpulseControlProblem delta_rescale(ImpulseControlProblem p, double delta0) {
	if(!(delta0 > 0.)) throw std::invalid_argument("delta_rescale: delta must be positive");
	p.delta = delta0;
	return p;
}

////////////////////////////////////////////////////////////////////////////////
// Markov decision processes with vanishing discount
////////////////////////////////////////////////////////////////////////////////

/// Controlled Markov chain data: per state, transition rows for the
/// discounted branch (w) and the undiscounted branch (z) with their costs.
struct MdpSpec {
	double rho = 0.;

	struct State {
		std::vector<std::vector<double>> w_rows;
		std::vector<double> w_costs;
		std::vector<std::vector<double>> z_rows;
		std::vector<double> z_costs;
		bool allow_continue = true;
		bool allow_impulse = true;
	};
	std::vector<State> states;
};

/// L rows are w_i / (1 + rho), B rows are z_i; delta = 1.
inline ImpulseControlProblem build_mdp(const MdpSpec &spec) {
	const std::size_t n = spec.states.size();
	if(!(spec.rho > 0.)) throw std::invalid_argument("mdp: rho must be positive");
	auto check_row = [n](const std::vector<double> &row) {
		if(row.size() != n) throw std::invalid_argument("mdp: bad transition row length");
		double sum = 0.;
		for(double x : row) {
			if(x < 0.) throw std::invalid_argument("mdp: negative transition probability");
			sum += x;
		}
		if(std::abs(sum - 1.) > 1e-12)
			throw std::invalid_argument("mdp: transition row does not sum to 1");
	};
	for(const auto &s : spec.states) {
		if(s.w_rows.size() != s.w_costs.size() || s.z_rows.size() != s.z_costs.size())
			throw std::invalid_argument("mdp: cost/row count mismatch");
		for(const auto &r : s.w_rows) check_row(r);
		for(const auto &r : s.z_rows) check_row(r);
		if(!s.allow_continue && !s.allow_impulse)
			throw std::invalid_argument("mdp: empty D set");
		if((s.allow_continue && s.w_rows.empty()))
			throw std::invalid_argument("mdp: continuation allowed but no w controls");
		if((s.allow_impulse && s.z_rows.empty()))
			throw std::invalid_argument("mdp: impulse allowed but no z controls");
	}

	auto data = std::make_shared<const MdpSpec>(spec);
	ImpulseControlProblem p;
	p.n = n;
	p.delta = 1.;
	p.w_counts.resize(n);
	p.z_counts.resize(n);
	p.d_sets.resize(n);
	for(std::size_t i = 0; i < n; ++i) {
		p.w_counts[i] = spec.states[i].w_rows.size();
		p.z_counts[i] = spec.states[i].z_rows.size();
		p.d_sets[i] = {spec.states[i].allow_continue, spec.states[i].allow_impulse};
	}
	p.continuation = [data](std::size_t i, std::size_t w, SparseRowBuffer &buf) {
		const auto &s = data->states[i];
		const double scale = 1. / (1. + data->rho);
		const auto &row = s.w_rows[w];
		for(std::size_t j = 0; j < row.size(); ++j)
			if(row[j] != 0.) buf.add(j, row[j] * scale);
		return s.w_costs[w];
	};
	p.impulse = [data](std::size_t i, std::size_t z, SparseRowBuffer &buf) {
		const auto &s = data->states[i];
		const auto &row = s.z_rows[z];
		for(std::size_t j = 0; j < row.size(); ++j)
			if(row[j] != 0.) buf.add(j, row[j]);
		return s.z_costs[z];
	};
	return p;
}

/// Flat text form:
///   states K
///   rho R
///   state I
///   w p1 ... pK c COST      (one line per w control)
///   z p1 ... pK k COST      (one line per z control)
///   d 0 | d 1 | d 0 1
inline std::string format_mdp_spec(const MdpSpec &spec) {
	std::ostringstream out;
	out.precision(17);
	out << "states " << spec.states.size() << "\n";
	out << "rho " << spec.rho << "\n";
	for(std::size_t i = 0; i < spec.states.size(); ++i) {
		const auto &s = spec.states[i];
		out << "state " << i << "\n";
		for(std::size_t w = 0; w < s.w_rows.size(); ++w) {
			out << "w";
			for(double x : s.w_rows[w]) out << " " << x;
			out << " c " << s.w_costs[w] << "\n";
		}
		for(std::size_t z = 0; z < s.z_rows.size(); ++z) {
			out << "z";
			for(double x : s.z_rows[z]) out << " " << x;
			out << " k " << s.z_costs[z] << "\n";
		}
		out << "d";
		if(s.allow_continue) out << " 0";
		if(s.allow_impulse) out << " 1";
		out << "\n";
	}
	return out.str();
}

inline MdpSpec parse_mdp_spec(std::istream &in) {
	MdpSpec spec;
	std::string line;
	std::size_t count = 0;
	bool have_count = false;
	MdpSpec::State *cur = nullptr;
	auto bad = [](const std::string &what) {
		return std::invalid_argument("mdp spec: " + what);
	};
	while(std::getline(in, line)) {
		std::istringstream ls(line);
		std::string key;
		if(!(ls >> key) || key[0] == '#') continue;
		if(key == "states") {
			if(!(ls >> count)) throw bad("bad states line");
			spec.states.resize(count);
			have_count = true;
		} else if(key == "rho") {
			if(!(ls >> spec.rho)) throw bad("bad rho line");
		} else if(key == "state") {
			std::size_t i;
			if(!have_count || !(ls >> i) || i >= count) throw bad("bad state line");
			cur = &spec.states[i];
			cur->allow_continue = cur->allow_impulse = false;
		} else if(key == "w" || key == "z") {
			if(!cur) throw bad("control line before state line");
			std::vector<double> row(count);
			for(auto &x : row)
				if(!(ls >> x)) throw bad("short transition row");
			std::string tag;
			double cost;
			if(!(ls >> tag >> cost) || tag != (key == "w" ? "c" : "k"))
				throw bad("missing cost on control line");
			if(key == "w") {
				cur->w_rows.push_back(std::move(row));
				cur->w_costs.push_back(cost);
			} else {
				cur->z_rows.push_back(std::move(row));
				cur->z_costs.push_back(cost);
			}
		} else if(key == "d") {
			if(!cur) throw bad("d line before state line");
			int flag;
			while(ls >> flag) {
				if(flag == 0) cur->allow_continue = true;
				else if(flag == 1) cur->allow_impulse = true;
				else throw bad("d entries must be 0 or 1");
			}
		} else {
			throw bad("unknown key '" + key + "'");
		}
	}
	if(!have_count) throw bad("missing states header");
	return spec;
}

inline MdpSpec parse_mdp_spec(const std::string &text) {
	std::istringstream in(text);
	return parse_mdp_spec(in);
}

////////////////////////////////////////////////////////////////////////////////
// Named instances
////////////////////////////////////////////////////////////////////////////////

namespace detail {

inline std::vector<double> basis_row(std::size_t n, std::size_t j) {
	std::vector<double> r(n, 0.);
	r[j] = 1.;
	return r;
}

} // namespace detail

/// Impulse transitions shift one state down; state 0 continues only.
/// Every admissible policy's matrix is weakly chained to the SDD row 0.
inline ImpulseControlProblem mdp_unidirectional_chain(std::size_t m, double rho = 0.1,
		double fixed_cost = 0.1) {
	MdpSpec spec;
	spec.rho = rho;
	spec.states.resize(m);
	for(std::size_t i = 0; i < m; ++i) {
		auto &s = spec.states[i];
		s.w_rows.push_back(detail::basis_row(m, i));
		s.w_costs.push_back(1. - 0.1 * static_cast<double>(i));
		if(i == 0) {
			s.allow_impulse = false;
		} else {
			s.z_rows.push_back(detail::basis_row(m, i - 1));
			s.z_costs.push_back(-fixed_cost);
		}
	}
	return build_mdp(spec);
}

/// Impulse transitions all jump to state 0 in one hop.
inline ImpulseControlProblem mdp_one_hop(std::size_t m, double rho = 0.1,
		double fixed_cost = 0.1) {
	MdpSpec spec;
	spec.rho = rho;
	spec.states.resize(m);
	for(std::size_t i = 0; i < m; ++i) {
		auto &s = spec.states[i];
		s.w_rows.push_back(detail::basis_row(m, i));
		s.w_costs.push_back(1. - 0.1 * static_cast<double>(i));
		if(i == 0) {
			s.allow_impulse = false;
		} else {
			s.z_rows.push_back(detail::basis_row(m, 0));
			s.z_costs.push_back(-fixed_cost);
		}
	}
	return build_mdp(spec);
}

/// Instance on which policy iteration started from zero selects the
/// self-jump at the distinguished state and hits a singular matrix at the
/// first improvement: impulses may target any state at cost
/// -C - |i - j|, and one state's continuation cost sits below -C.
inline ImpulseControlProblem mdp_policy_iteration_failure(std::size_t m, double rho = 0.1,
		double fixed_cost = 0.1) {
	if(m < 2) throw std::invalid_argument("need at least two states");
	MdpSpec spec;
	spec.rho = rho;
	spec.states.resize(m);
	const std::size_t r = m / 2;
	for(std::size_t i = 0; i < m; ++i) {
		auto &s = spec.states[i];
		std::vector<double> uniform(m, 1. / static_cast<double>(m));
		s.w_rows.push_back(std::move(uniform));
		s.w_costs.push_back(i == r ? -1. : 1.);
		for(std::size_t j = 0; j < m; ++j) {
			s.z_rows.push_back(detail::basis_row(m, j));
			s.z_costs.push_back(-fixed_cost
					- std::abs(static_cast<double>(i) - static_cast<double>(j)));
		}
	}
	return build_mdp(spec);
}

struct ModifiedProblemPair {
	ImpulseControlProblem original;
	ImpulseControlProblem restricted;
};

/// The failure instance repaired by restriction: tridiagonal stochastic
/// controls with nonincreasing best continuation cost, and the impulse set
/// cut down to strictly-down transitions (state 0 continues only).  Policy
/// iteration on the restricted problem converges and its solution solves the
/// original.
inline ModifiedProblemPair mdp_modified_problem(std::size_t m, double rho = 0.1,
		double fixed_cost = 0.1) {
	if(m < 2) throw std::invalid_argument("need at least two states");
	MdpSpec spec;
	spec.rho = rho;
	spec.states.resize(m);
	for(std::size_t i = 0; i < m; ++i) {
		auto &s = spec.states[i];
		const double base = 1. - 0.2 * static_cast<double>(i);
		// stay
		s.w_rows.push_back(detail::basis_row(m, i));
		s.w_costs.push_back(base);
		// drift left (clipped at the ends), support within {i-1, i, i+1}
		std::vector<double> drift(m, 0.);
		drift[i > 0 ? i - 1 : 0] += 0.5;
		drift[i] += 0.3;
		drift[i + 1 < m ? i + 1 : i] += 0.2;
		s.w_rows.push_back(std::move(drift));
		s.w_costs.push_back(base - 0.2);
		for(std::size_t j = 0; j < m; ++j) {
			s.z_rows.push_back(detail::basis_row(m, j));
			s.z_costs.push_back(-fixed_cost
					- std::abs(static_cast<double>(i) - static_cast<double>(j)));
		}
	}
	ModifiedProblemPair pair;
	pair.original = build_mdp(spec);
	pair.restricted = restrict_controls(pair.original,
			[](std::size_t i, int psi, std::size_t branch) {
				if(psi == 0) return true;
				return i > 0 && branch < i; // strictly-down jumps only
			});
	return pair;
}

} // namespace hjbqvi

#endif
