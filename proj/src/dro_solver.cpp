#include "drouc/dro_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "drouc/errors.hpp"
#include "drouc/opt_kernel.hpp"
#include "drouc/parallel.hpp"
#include "json.hpp"

namespace drouc {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_ms(clock_type::time_point t0) {
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count();
}

void check_distribution(const std::vector<double>& pi, const char* what) {
    if (pi.empty()) throw std::invalid_argument(std::string(what) + ": empty distribution");
    double sum = 0.0;
    for (double p : pi) {
        if (!std::isfinite(p) || p < 0.0)
            throw std::invalid_argument(std::string(what) + ": probabilities must be in [0,1]");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + ": probabilities sum to " +
                                    std::to_string(sum));
}

std::vector<double> nominal_probabilities(const ScenarioSet& scen) {
    std::vector<double> pi;
    pi.reserve(scen.scenarios.size());
    for (const auto& s : scen.scenarios) pi.push_back(s.probability);
    check_distribution(pi, "scenario set");
    return pi;
}

// ---- first-stage MILP scaffolding shared by both masters ----------------

struct MasterLayout {
    int G = 0, H = 0, extra = 0;  // continuous tail vars after the u and v blocks
    int n() const { return 2 * G * H + extra; }
    int u_ix(int g, int h) const { return g * H + h; }
    int v_ix(int g, int h) const { return G * H + g * H + h; }
};

void add_commitment_rows(opt::LinearProgram& lp, const MicrogridInstance& inst,
                         const MasterLayout& L) {
    auto blank = [&] { return std::vector<double>(L.n(), 0.0); };
    for (int g = 0; g < L.G; ++g) {
        const TgrParams& t = inst.tgrs[g];
        double init = t.initial_commitment;
        for (int h = 0; h < L.H; ++h) {
            // start-up linking: u[h] - u[h-1] <= v[h]
            auto r = blank();
            r[L.u_ix(g, h)] = 1.0;
            if (h > 0) r[L.u_ix(g, h - 1)] = -1.0;
            r[L.v_ix(g, h)] = -1.0;
            lp.add_row(r, opt::Sense::LE, h == 0 ? init : 0.0);

            // switch-on at h pins u through the up window
            for (int nu = h + 1; nu < std::min(h + t.min_up_h, L.H); ++nu) {
                auto w = blank();
                w[L.u_ix(g, h)] = 1.0;
                if (h > 0) w[L.u_ix(g, h - 1)] = -1.0;
                w[L.u_ix(g, nu)] = -1.0;
                lp.add_row(w, opt::Sense::LE, h == 0 ? init : 0.0);
            }
            // switch-off at h keeps u off through the down window
            for (int nu = h + 1; nu < std::min(h + t.min_down_h, L.H); ++nu) {
                auto w = blank();
                w[L.u_ix(g, h)] = -1.0;
                if (h > 0) w[L.u_ix(g, h - 1)] = 1.0;
                w[L.u_ix(g, nu)] = 1.0;
                lp.add_row(w, opt::Sense::LE, h == 0 ? 1.0 - init : 1.0);
            }
        }
    }
}

void set_commitment_columns(opt::MixedIntegerProgram& mip, const MicrogridInstance& inst,
                            const MasterLayout& L) {
    auto& lp = mip.lp;
    mip.integral.assign(L.n(), 0);
    for (int g = 0; g < L.G; ++g) {
        for (int h = 0; h < L.H; ++h) {
            lp.objective[L.u_ix(g, h)] = inst.tgrs[g].c_u_per_h;
            lp.objective[L.v_ix(g, h)] = inst.tgrs[g].c_v;
            lp.lower[L.u_ix(g, h)] = 0.0;
            lp.upper[L.u_ix(g, h)] = 1.0;
            lp.lower[L.v_ix(g, h)] = 0.0;
            lp.upper[L.v_ix(g, h)] = 1.0;
            // v relaxes to its lower envelope once u is integral, so only u
            // needs branching
            mip.integral[L.u_ix(g, h)] = 1;
        }
    }
}

// Round the u block and rebuild v as the canonical start-up indicator; ties
// in c_v = 0 can leave the MILP's v off the lower envelope.
CommitmentSchedule schedule_from_master(const std::vector<double>& x, const MicrogridInstance& inst,
                                        const MasterLayout& L) {
    CommitmentSchedule s;
    s.u.assign(L.G, std::vector<char>(L.H, 0));
    s.v.assign(L.G, std::vector<char>(L.H, 0));
    for (int g = 0; g < L.G; ++g) {
        for (int h = 0; h < L.H; ++h) s.u[g][h] = x[L.u_ix(g, h)] > 0.5 ? 1 : 0;
        for (int h = 0; h < L.H; ++h) {
            char prev = h == 0 ? static_cast<char>(inst.tgrs[g].initial_commitment) : s.u[g][h - 1];
            s.v[g][h] = (s.u[g][h] == 1 && prev == 0) ? 1 : 0;
        }
    }
    return s;
}

std::vector<char> schedule_key(const CommitmentSchedule& s) {
    std::vector<char> key;
    for (const auto& row : s.u) key.insert(key.end(), row.begin(), row.end());
    return key;
}

void require_valid(const CommitmentSchedule& s, const MicrogridInstance& inst, const char* who) {
    auto problems = validate_commitment(s, inst);
    if (!problems.empty())
        throw std::logic_error(std::string(who) + " produced an invalid schedule: " + problems[0]);
}

// Lower bound on any scenario's dispatch cost; 0 unless prices go negative.
double dispatch_cost_floor(const MicrogridInstance& inst, const ScenarioSet& scen) {
    double lo = 0.0;
    for (const auto& s : scen.scenarios) {
        double day = 0.0;
        for (double lam : s.lambda)
            if (lam < 0.0 && std::isfinite(inst.purchase_limit_kw))
                day += lam * inst.purchase_limit_kw;
        lo = std::min(lo, day);
    }
    return lo;
}

void check_pairing(const MicrogridInstance& inst, const ScenarioSet& scen) {
    if (inst.horizon < 1) throw std::invalid_argument("instance horizon must be positive");
    if (scen.horizon != inst.horizon)
        throw std::invalid_argument("scenario horizon " + std::to_string(scen.horizon) +
                                    " does not match instance horizon " +
                                    std::to_string(inst.horizon));
    if (scen.scenarios.empty()) throw std::invalid_argument("scenario set is empty");
}

}  // namespace

// ---- ambiguity-set math ---------------------------------------------------

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: support size mismatch");
    check_distribution(p, "kl_divergence p");
    check_distribution(q, "kl_divergence q");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0)
            throw std::invalid_argument("kl_divergence: p has mass where q vanishes");
        d += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(d, 0.0);
}

double kbar(double q_value, double mu, double zeta, double zeta_floor) {
    if (!(zeta >= zeta_floor))
        throw std::invalid_argument("kbar: zeta " + std::to_string(zeta) + " below floor");
    return (q_value - mu) / zeta;
}

double rbar(double q_value, double mu, double zeta, double zeta_floor) {
    return zeta * std::exp(kbar(q_value, mu, zeta, zeta_floor) - 1.0);
}

double r_total(const std::vector<double>& q_values, const std::vector<double>& pi_o, double mu,
               double zeta, double zeta_floor) {
    if (q_values.size() != pi_o.size())
        throw std::invalid_argument("r_total: scenario count mismatch");
    check_distribution(pi_o, "r_total");
    double r = 0.0;
    for (std::size_t w = 0; w < q_values.size(); ++w)
        r += pi_o[w] * rbar(q_values[w], mu, zeta, zeta_floor);
    return r;
}

Cut build_cut(const CutAnchor& anchor, const std::vector<ScenarioEvaluation>& evals,
              const std::vector<double>& pi_o, const AmbiguityParams& params) {
    if (evals.size() != pi_o.size()) throw std::invalid_argument("build_cut: scenario mismatch");
    check_distribution(pi_o, "build_cut");
    if (evals.empty() || evals[0].dq_du.empty())
        throw std::invalid_argument("build_cut: empty evaluation");
    const int G = static_cast<int>(evals[0].dq_du.size());
    const int H = static_cast<int>(evals[0].dq_du[0].size());

    Cut cut;
    cut.anchor = anchor;
    cut.anchor.zeta = std::max(anchor.zeta, params.zeta_floor);
    cut.alpha.assign(G, std::vector<double>(H, 0.0));
    for (std::size_t w = 0; w < evals.size(); ++w) {
        double kb = (evals[w].q - anchor.mu) / cut.anchor.zeta;
        if (kb > params.k_max + 1e-6)
            throw std::logic_error("build_cut: exponent guard violated, kbar=" +
                                   std::to_string(kb));
        double e = std::exp(kb - 1.0);
        cut.beta -= pi_o[w] * e;
        cut.gamma += pi_o[w] * (1.0 - kb) * e;
        cut.anchor_value += pi_o[w] * cut.anchor.zeta * e;
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < H; ++h) cut.alpha[g][h] += pi_o[w] * e * evals[w].dq_du[g][h];
    }
    return cut;
}

double evaluate_cut(const Cut& cut, const std::vector<std::vector<double>>& u, double mu,
                    double zeta) {
    double v = cut.anchor_value + cut.beta * (mu - cut.anchor.mu) +
               cut.gamma * (zeta - cut.anchor.zeta);
    for (std::size_t g = 0; g < cut.alpha.size(); ++g)
        for (std::size_t h = 0; h < cut.alpha[g].size(); ++h)
            v += cut.alpha[g][h] * (u[g][h] - static_cast<double>(cut.anchor.schedule.u[g][h]));
    return v;
}

// ---- Benders master --------------------------------------------------------

MasterSolution solve_master(const std::vector<Cut>& cuts, const MicrogridInstance& instance,
                            double q_max, const AmbiguityParams& params) {
    if (!(params.rho >= 0.0) || !(params.k_max > 0.0) || !(params.zeta_floor > 0.0))
        throw std::invalid_argument("solve_master: bad ambiguity params");
    if (!std::isfinite(q_max)) throw std::invalid_argument("solve_master: q_max not finite");
    q_max = std::max(q_max, 0.0);

    MasterLayout L{instance.num_tgrs(), instance.horizon, 3};
    const int mu_i = 2 * L.G * L.H;
    const int ze_i = mu_i + 1;
    const int th_i = mu_i + 2;

    opt::MixedIntegerProgram mip;
    auto& lp = mip.lp;
    lp.objective.assign(L.n(), 0.0);
    lp.lower.assign(L.n(), 0.0);
    lp.upper.assign(L.n(), 0.0);
    set_commitment_columns(mip, instance, L);

    lp.objective[mu_i] = 1.0;
    lp.objective[ze_i] = params.rho;
    lp.objective[th_i] = 1.0;
    lp.lower[mu_i] = -q_max;
    lp.upper[mu_i] = q_max;
    lp.lower[ze_i] = params.zeta_floor;
    lp.upper[ze_i] = q_max / std::max(params.rho, 1e-6) + 1.0;
    lp.lower[th_i] = 0.0;  // the exponential surrogate is nonnegative
    lp.upper[th_i] = opt::kInf;

    add_commitment_rows(lp, instance, L);

    // exponent guard: q_max - mu <= k_max * zeta
    {
        std::vector<double> r(L.n(), 0.0);
        r[mu_i] = -1.0;
        r[ze_i] = -params.k_max;
        lp.add_row(r, opt::Sense::LE, -q_max);
    }

    // theta >= cut(u, mu, zeta); rows rescaled so the first iterations'
    // enormous exponentials do not wreck the basis
    for (const Cut& cut : cuts) {
        std::vector<double> r(L.n(), 0.0);
        double rhs = -cut.anchor_value + cut.beta * cut.anchor.mu + cut.gamma * cut.anchor.zeta;
        double norm = std::max({1.0, std::abs(cut.beta), std::abs(cut.gamma)});
        for (std::size_t g = 0; g < cut.alpha.size(); ++g) {
            for (std::size_t h = 0; h < cut.alpha[g].size(); ++h) {
                double a = cut.alpha[g][h];
                r[L.u_ix(static_cast<int>(g), static_cast<int>(h))] = a;
                rhs += a * static_cast<double>(cut.anchor.schedule.u[g][h]);
                norm = std::max(norm, std::abs(a));
            }
        }
        r[mu_i] = cut.beta;
        r[ze_i] = cut.gamma;
        r[th_i] = -1.0;
        norm = std::max(norm, std::abs(rhs));
        for (double& c : r) c /= norm;
        lp.add_row(r, opt::Sense::LE, rhs / norm);
    }

    opt::MilpConfig mcfg;
    auto out = opt::solve_milp(mip, mcfg);
    if (out.status != opt::SolveStatus::Optimal)
        throw std::runtime_error("master MILP did not solve: " + opt::to_string(out.status));

    MasterSolution ms;
    ms.schedule = schedule_from_master(out.x, instance, L);
    require_valid(ms.schedule, instance, "solve_master");
    ms.mu = out.x[mu_i];
    ms.zeta = std::max(out.x[ze_i], params.zeta_floor);
    ms.theta = std::max(out.x[th_i], 0.0);
    ms.objective =
        first_stage_cost(ms.schedule, instance) + ms.mu + params.rho * ms.zeta + ms.theta;
    return ms;
}

// ---- exact inner maximization ----------------------------------------------

std::pair<double, WorstCaseDistribution> worst_case_expectation(const std::vector<double>& q_values,
                                                                const std::vector<double>& pi_o,
                                                                double rho) {
    if (q_values.size() != pi_o.size())
        throw std::invalid_argument("worst_case_expectation: size mismatch");
    check_distribution(pi_o, "worst_case_expectation");
    for (double p : pi_o)
        if (p <= 0.0)
            throw std::invalid_argument("worst_case_expectation: nominal mass must be positive");
    for (double q : q_values)
        if (!std::isfinite(q)) throw std::invalid_argument("worst_case_expectation: q not finite");
    if (!(rho >= 0.0) || !std::isfinite(rho))
        throw std::invalid_argument("worst_case_expectation: rho must be nonnegative");

    const std::size_t S = q_values.size();
    auto finish = [&](std::vector<double> p, double kl) {
        // Pin the left-to-right sum to exactly 1.0. Zero the negligible tail
        // behind the last heavy entry and hand that entry the residual
        // 1.0 - partial: the final addition then lands on 1.0 exactly
        // (Sterbenz when partial >= 1/2, within a quarter ulp of 1 otherwise).
        // Nudging entries by the residual instead can ping-pong one ulp
        // around 1 forever.
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::size_t last = 0;
            for (std::size_t w = 0; w < S; ++w)
                if (p[w] >= 1e-12) last = w;
            double partial = 0.0;
            for (std::size_t w = 0; w < last; ++w) partial += p[w];
            if (partial < 1.0) {
                for (std::size_t w = last + 1; w < S; ++w) p[w] = 0.0;
                p[last] = 1.0 - partial;
                break;
            }
            // heavy mass over-sums past 1; rescale once and retry
            double sum = partial;
            for (std::size_t w = last; w < S; ++w) sum += p[w];
            for (double& x : p) x /= sum;
        }
        double value = 0.0;
        for (std::size_t w = 0; w < S; ++w) value += p[w] * q_values[w];
        WorstCaseDistribution d;
        d.probabilities = std::move(p);
        d.attained_expectation = value;
        d.kl_to_nominal = kl;
        return std::make_pair(value, std::move(d));
    };

    if (rho <= 0.0) return finish(pi_o, 0.0);

    double qmax = *std::max_element(q_values.begin(), q_values.end());
    double qmin = *std::min_element(q_values.begin(), q_values.end());
    double scale = std::max({1.0, std::abs(qmax), std::abs(qmin)});
    if (qmax - qmin <= 1e-15 * scale) return finish(pi_o, 0.0);

    // mass of the argmax set caps how far the distribution can tilt
    double top_mass = 0.0;
    for (std::size_t w = 0; w < S; ++w)
        if (q_values[w] >= qmax - 1e-12 * scale) top_mass += pi_o[w];
    double kl_cap = -std::log(top_mass);
    if (rho >= kl_cap * (1.0 - 1e-12) - 1e-15) {
        std::vector<double> p(S, 0.0);
        for (std::size_t w = 0; w < S; ++w)
            if (q_values[w] >= qmax - 1e-12 * scale) p[w] = pi_o[w] / top_mass;
        return finish(std::move(p), std::min(kl_cap, rho));
    }

    auto tilt = [&](double t) {
        std::vector<double> p(S);
        double z = 0.0;
        for (std::size_t w = 0; w < S; ++w) {
            p[w] = pi_o[w] * std::exp(t * (q_values[w] - qmax));
            z += p[w];
        }
        for (double& x : p) x /= z;
        return p;
    };
    auto kl_of = [&](const std::vector<double>& p) {
        double d = 0.0;
        for (std::size_t w = 0; w < S; ++w)
            if (p[w] > 0.0) d += p[w] * std::log(p[w] / pi_o[w]);
        return std::max(d, 0.0);
    };

    double hi = 1.0;
    while (kl_of(tilt(hi)) < rho && hi < 1e300) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
        double mid = 0.5 * (lo + hi);
        if (kl_of(tilt(mid)) <= rho)
            lo = mid;
        else
            hi = mid;
    }
    auto p = tilt(lo);  // stays on the feasible side of the KL budget
    double kl = kl_of(p);
    return finish(std::move(p), kl);
}

// ---- second-stage sweep ----------------------------------------------------

std::vector<ScenarioEvaluation> evaluate_scenarios(const MicrogridInstance& instance,
                                                   const ScenarioSet& scenarios,
                                                   const CommitmentSchedule& schedule,
                                                   int threads) {
    check_pairing(instance, scenarios);
    std::vector<ScenarioEvaluation> out(scenarios.scenarios.size());
    std::exception_ptr first_error;
    parallel_for(out.size(), threads, [&](std::size_t w) {
        try {
            DispatchResult r =
                evaluate_q(schedule, scenario_profile(scenarios.scenarios[w]), instance);
            out[w].q = r.cost;
            out[w].dq_du = std::move(r.phi);
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    return out;
}

// ---- exact L-shaped core (risk-neutral and tilting-oracle variants) --------

namespace {

struct ValueCut {
    std::vector<std::vector<double>> slope;  // G x H on u
    CommitmentSchedule anchor;
    double value = 0.0;  // worst-case (or nominal) expectation at the anchor
};

struct LShapedOut {
    CommitmentSchedule schedule;
    double lb = -opt::kInf;
    double ub = opt::kInf;
    WorstCaseDistribution dist;
    bool converged = false;
};

struct ValuePoint {
    double total = 0.0;  // c.x + expectation term
    ValueCut cut;
    WorstCaseDistribution dist;
};

ValuePoint evaluate_point(const MicrogridInstance& inst, const ScenarioSet& scen,
                          const std::vector<double>& pi_o, double rho,
                          const CommitmentSchedule& x, int threads) {
    auto evals = evaluate_scenarios(inst, scen, x, threads);
    std::vector<double> qs(evals.size());
    for (std::size_t w = 0; w < evals.size(); ++w) qs[w] = evals[w].q;
    auto [wv, dist] = worst_case_expectation(qs, pi_o, rho);

    ValuePoint vp;
    vp.total = first_stage_cost(x, inst) + wv;
    vp.dist = std::move(dist);
    vp.cut.anchor = x;
    vp.cut.value = wv;
    const int G = inst.num_tgrs(), H = inst.horizon;
    vp.cut.slope.assign(G, std::vector<double>(H, 0.0));
    // the maximizer is fixed, so the expectation's slope in u is the
    // probability-weighted dispatch sensitivity
    for (std::size_t w = 0; w < evals.size(); ++w)
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < H; ++h)
                vp.cut.slope[g][h] += vp.dist.probabilities[w] * evals[w].dq_du[g][h];
    return vp;
}

LShapedOut lshaped_exact(const MicrogridInstance& inst, const ScenarioSet& scen,
                         const std::vector<double>& pi_o, double rho, const SolverConfig& cfg,
                         double value_floor, const std::vector<CommitmentSchedule>& warm,
                         SolveTrace& trace, int phase, double& trace_ub,
                         clock_type::time_point t0, int& iter_seq) {
    MasterLayout L{inst.num_tgrs(), inst.horizon, 1};
    const int t_i = 2 * L.G * L.H;

    std::vector<ValueCut> vcuts;
    std::set<std::vector<char>> visited;
    LShapedOut out;

    auto absorb = [&](const CommitmentSchedule& x) {
        auto key = schedule_key(x);
        if (!visited.insert(key).second) return false;
        ValuePoint vp = evaluate_point(inst, scen, pi_o, rho, x, cfg.threads);
        if (vp.total < out.ub) {
            out.ub = vp.total;
            out.schedule = x;
            out.dist = vp.dist;
        }
        vcuts.push_back(std::move(vp.cut));
        return true;
    };
    for (const auto& x : warm) absorb(x);

    for (int it = 0; it < cfg.max_iter; ++it) {
        opt::MixedIntegerProgram mip;
        auto& lp = mip.lp;
        lp.objective.assign(L.n(), 0.0);
        lp.lower.assign(L.n(), 0.0);
        lp.upper.assign(L.n(), 0.0);
        set_commitment_columns(mip, inst, L);
        lp.objective[t_i] = 1.0;
        lp.lower[t_i] = value_floor;
        lp.upper[t_i] = opt::kInf;
        add_commitment_rows(lp, inst, L);
        for (const ValueCut& vc : vcuts) {
            std::vector<double> r(L.n(), 0.0);
            double rhs = -vc.value;
            double norm = 1.0;
            for (int g = 0; g < L.G; ++g)
                for (int h = 0; h < L.H; ++h) {
                    r[L.u_ix(g, h)] = vc.slope[g][h];
                    rhs += vc.slope[g][h] * static_cast<double>(vc.anchor.u[g][h]);
                    norm = std::max(norm, std::abs(vc.slope[g][h]));
                }
            r[t_i] = -1.0;
            norm = std::max(norm, std::abs(rhs));
            for (double& c : r) c /= norm;
            lp.add_row(r, opt::Sense::LE, rhs / norm);
        }

        auto sol = opt::solve_milp(mip, opt::MilpConfig{});
        if (sol.status != opt::SolveStatus::Optimal)
            throw std::runtime_error("value master did not solve: " + opt::to_string(sol.status));
        out.lb = std::max(out.lb, sol.objective);

        CommitmentSchedule cand = schedule_from_master(sol.x, inst, L);
        require_valid(cand, inst, "lshaped master");
        bool fresh = absorb(cand);

        ++iter_seq;
        trace_ub = std::min(trace_ub, out.ub);
        double cut_norm = 0.0;
        for (const auto& row : vcuts.back().slope)
            for (double v : row) cut_norm = std::max(cut_norm, std::abs(v));
        trace.records.push_back(
            {iter_seq, phase, out.lb, trace_ub, 0.0, 0.0, cut_norm, elapsed_ms(t0)});

        double gap = out.ub - out.lb;
        if (gap <= 1e-9 * std::max(1.0, std::abs(out.ub))) {
            out.converged = true;
            break;
        }
        if (!fresh) {
            // the exact cut for this schedule is already in the master; any
            // residual gap is numerical noise
            out.converged = gap <= cfg.tol;
            break;
        }
    }
    return out;
}

// Exact minimizer of mu + rho*zeta + r_total(q, ., .) for a fixed schedule.
// The inner minimum over mu has a closed form (stationarity pins the tilted
// mass to one), which leaves a single convex profile in zeta for golden
// section. Anchoring a cut here instead of at the master's iterate keeps its
// coefficients near unit scale.
std::pair<double, double> dual_minimizer(const std::vector<double>& qs,
                                         const std::vector<double>& pi_o, double rho,
                                         double zeta_floor, double zeta_hi, double k_max) {
    double q_hi = *std::max_element(qs.begin(), qs.end());
    auto lse = [&](double zeta) {
        double s = 0.0;
        for (std::size_t w = 0; w < qs.size(); ++w)
            s += pi_o[w] * std::exp((qs[w] - q_hi) / zeta);
        return q_hi / zeta + std::log(s);
    };
    auto g = [&](double y) {
        double zeta = std::exp(y);
        return zeta * lse(zeta) + rho * zeta;
    };
    double a = std::log(zeta_floor);
    double b = std::log(std::max(zeta_hi, 2.0 * zeta_floor));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double fc = g(c), fd = g(d);
    for (int i = 0; i < 160; ++i) {
        if (fc < fd) {
            b = d; d = c; fd = fc;
            c = b - gr * (b - a);
            fc = g(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + gr * (b - a);
            fd = g(d);
        }
    }
    double zeta = std::exp(0.5 * (a + b));
    double mu = zeta * (lse(zeta) - 1.0);
    if ((q_hi - mu) / zeta > k_max) mu = q_hi - k_max * zeta;  // stay inside the guard
    return {mu, zeta};
}

}  // namespace

// ---- full solvers ----------------------------------------------------------

UcSolution solve_suc(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                     const SolverConfig& config) {
    check_pairing(instance, scenarios);
    auto pi_o = nominal_probabilities(scenarios);
    auto t0 = clock_type::now();

    SolveTrace trace;
    double trace_ub = opt::kInf;
    int iter_seq = 0;
    double floor = dispatch_cost_floor(instance, scenarios);
    auto out = lshaped_exact(instance, scenarios, pi_o, 0.0, config, floor,
                             {all_off_schedule(instance)}, trace, 2, trace_ub, t0, iter_seq);

    UcSolution sol;
    sol.schedule = out.schedule;
    sol.objective = out.ub;
    sol.lb = out.lb;
    sol.ub = out.ub;
    sol.rho = 0.0;
    sol.worst_case = out.dist;
    sol.trace = std::move(trace);
    sol.trace.status = out.converged ? "converged" : "iteration_limit";
    sol.trace.iterations = iter_seq;
    sol.trace.wall_ms = elapsed_ms(t0);
    return sol;
}

UcSolution solve_rkl_muc(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                         const SolverConfig& config) {
    check_pairing(instance, scenarios);
    const AmbiguityParams& amb = config.ambiguity;
    if (!(amb.rho >= 0.0)) throw std::invalid_argument("rho must be nonnegative");
    if (amb.rho < 1e-12) {
        // the dual optimum recedes to zeta -> infinity; the risk-neutral
        // problem is the exact limit
        UcSolution sol = solve_suc(instance, scenarios, config);
        sol.rho = amb.rho;
        return sol;
    }

    auto pi_o = nominal_probabilities(scenarios);
    auto t0 = clock_type::now();
    SolveTrace trace;

    CommitmentSchedule x0 = all_off_schedule(instance);
    auto evals0 = evaluate_scenarios(instance, scenarios, x0, config.threads);
    std::vector<double> q0s(evals0.size());
    double q0 = 0.0;
    for (std::size_t w = 0; w < evals0.size(); ++w) {
        q0s[w] = evals0[w].q;
        q0 = std::max(q0, evals0[w].q);
    }
    // committing a unit can add at most its mandatory-minimum fuel bill on
    // top of the all-off cost, so pad the bound by that much
    double margin = 0.0;
    for (const auto& t : instance.tgrs) margin += t.c_p_per_kwh * t.p_min_kw;
    margin *= instance.horizon;
    double cost_floor = dispatch_cost_floor(instance, scenarios);
    double q_max = std::max({q0 + margin, std::abs(cost_floor), 0.0});
    double zeta_hi = q_max / std::max(amb.rho, 1e-6) + 1.0;
    trace.q_max = q_max;

    std::vector<Cut> cuts;
    std::vector<CommitmentSchedule> candidates = {x0};
    double lb = -opt::kInf, ub = opt::kInf;
    int iter_seq = 0;
    bool phase1_done = false;
    MasterSolution prev{};
    bool have_prev = false;

    // seed with a cut at the all-off schedule's own dual minimizer; without
    // it the first masters sit on the exponent guard and every row they
    // generate carries e^(k_max-1)-scale coefficients
    {
        auto [mu0, ze0] = dual_minimizer(q0s, pi_o, amb.rho, amb.zeta_floor, zeta_hi, amb.k_max);
        cuts.push_back(build_cut({x0, mu0, ze0}, evals0, pi_o, amb));
        ub = first_stage_cost(x0, instance) + mu0 + amb.rho * ze0 +
             r_total(q0s, pi_o, mu0, ze0, amb.zeta_floor);
    }

    for (int it = 0; it < config.max_iter && !phase1_done; ++it) {
        MasterSolution ms = solve_master(cuts, instance, q_max, amb);
        lb = std::max(lb, ms.objective);

        auto evals = evaluate_scenarios(instance, scenarios, ms.schedule, config.threads);
        std::vector<double> qs(evals.size());
        double q_hi = -opt::kInf;
        for (std::size_t w = 0; w < evals.size(); ++w) {
            qs[w] = evals[w].q;
            q_hi = std::max(q_hi, qs[w]);
        }
        double kb_max = (q_hi - ms.mu) / ms.zeta;
        trace.max_kbar_seen = std::max(trace.max_kbar_seen, kb_max);
        if (kb_max > amb.k_max + 1e-4)
            throw std::logic_error("exponent guard violated by a master candidate: kbar=" +
                                   std::to_string(kb_max));

        auto [tmu, tze] = dual_minimizer(qs, pi_o, amb.rho, amb.zeta_floor, zeta_hi, amb.k_max);
        double cand_ub = first_stage_cost(ms.schedule, instance) + tmu + amb.rho * tze +
                         r_total(qs, pi_o, tmu, tze, amb.zeta_floor);
        ub = std::min(ub, cand_ub);
        candidates.push_back(ms.schedule);

        Cut cut = build_cut({ms.schedule, ms.mu, ms.zeta}, evals, pi_o, amb);
        double cut_norm = std::max(std::abs(cut.beta), std::abs(cut.gamma));
        for (const auto& row : cut.alpha)
            for (double a : row) cut_norm = std::max(cut_norm, std::abs(a));

        ++iter_seq;
        trace.records.push_back({iter_seq, 1, lb, ub, ms.mu, ms.zeta, cut_norm, elapsed_ms(t0)});

        if (ub - lb <= config.tol) {
            phase1_done = true;
        } else if (have_prev && schedule_key(prev.schedule) == schedule_key(ms.schedule) &&
                   std::abs(prev.mu - ms.mu) <= 1e-9 * (1.0 + q_max) &&
                   std::abs(prev.zeta - ms.zeta) <= 1e-9 * (1.0 + q_max)) {
            // repeating candidate: the guard or a box is pinning the dual
            // iterate; hand the incumbent to the exact refinement
            phase1_done = true;
        } else {
            cuts.push_back(std::move(cut));
            // companion cut at the schedule's dual minimizer; this is the one
            // that actually prices the candidate, and at sane magnitudes
            if (std::abs(tmu - ms.mu) > 1e-12 * (1.0 + std::abs(ms.mu)) ||
                std::abs(tze - ms.zeta) > 1e-12 * (1.0 + ms.zeta))
                cuts.push_back(build_cut({ms.schedule, tmu, tze}, evals, pi_o, amb));
        }
        prev = ms;
        have_prev = true;

        if (std::abs(ms.mu) >= q_max * (1.0 - 1e-9) ||
            ms.zeta <= amb.zeta_floor * (1.0 + 1e-9) ||
            ms.zeta >= (q_max / std::max(amb.rho, 1e-6) + 1.0) * (1.0 - 1e-9))
            trace.phase1_box_active = true;
        else
            trace.phase1_box_active = false;
    }

    // certify (and repair, when the guard has biased phase 1) against the
    // exact tilting oracle
    double trace_ub = ub;
    auto refined = lshaped_exact(instance, scenarios, pi_o, amb.rho, config, cost_floor,
                                 candidates, trace, 2, trace_ub, t0, iter_seq);

    UcSolution sol;
    sol.schedule = refined.schedule;
    sol.objective = refined.ub;
    sol.lb = refined.lb;
    sol.ub = refined.ub;
    sol.rho = amb.rho;
    sol.worst_case = refined.dist;
    sol.cuts = std::move(cuts);
    sol.trace = std::move(trace);
    sol.trace.status = refined.converged ? "converged" : "iteration_limit";
    sol.trace.iterations = iter_seq;
    sol.trace.wall_ms = elapsed_ms(t0);
    return sol;
}

// ---- serialization ----------------------------------------------------------

std::string solution_to_json(const UcSolution& solution) {
    nlohmann::json j;
    j["rho"] = solution.rho;
    j["objective"] = solution.objective;
    j["lb"] = solution.lb;
    j["ub"] = solution.ub;
    j["iterations"] = solution.trace.iterations;
    j["status"] = solution.trace.status;

    nlohmann::json sched;
    auto to_ints = [](const std::vector<std::vector<char>>& m) {
        std::vector<std::vector<int>> out;
        out.reserve(m.size());
        for (const auto& row : m) out.emplace_back(row.begin(), row.end());
        return out;
    };
    sched["u"] = to_ints(solution.schedule.u);
    sched["v"] = to_ints(solution.schedule.v);
    j["schedule"] = sched;

    nlohmann::json wc;
    wc["probabilities"] = solution.worst_case.probabilities;
    wc["attained_expectation"] = solution.worst_case.attained_expectation;
    wc["kl_to_nominal"] = solution.worst_case.kl_to_nominal;
    j["worst_case_distribution"] = wc;

    nlohmann::json timing;
    timing["wall_ms"] = solution.trace.wall_ms;
    j["timing"] = timing;
    return j.dump(2);
}

void save_solution(const UcSolution& solution, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << solution_to_json(solution) << "\n";
    if (!out.good()) throw io_error("failed writing " + path);
}

}  // namespace drouc
