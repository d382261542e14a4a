#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "drouc/dro_solver.hpp"
#include "drouc/errors.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "test_instances.hpp"

using namespace drouc;

namespace {

MicrogridInstance one_tgr_instance(int horizon = 2) {
    MicrogridInstance inst;
    inst.horizon = horizon;
    TgrParams t;
    t.id = "g0";
    t.p_min_kw = 0.5;
    t.p_max_kw = 4.0;
    t.c_p_per_kwh = 0.08;
    t.c_u_per_h = 0.02;
    t.c_v = 0.05;
    inst.tgrs.push_back(t);
    return inst;
}

double relerr(double got, double want) {
    return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace

TEST_CASE("kl_divergence") {
    CHECK(kl_divergence({0.3, 0.7}, {0.3, 0.7}) == doctest::Approx(0.0));
    CHECK(kl_divergence({1.0, 0.0}, {0.5, 0.5}) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    // 0.75 ln 1.5 + 0.25 ln 0.5, frozen from a high-precision evaluation
    CHECK(kl_divergence({0.75, 0.25}, {0.5, 0.5}) ==
          doctest::Approx(0.13081203594113697).epsilon(1e-14));
    CHECK_THROWS_AS(kl_divergence({1.0}, {0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(kl_divergence({0.5, 0.4}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("kbar and rbar closed forms") {
    CHECK(kbar(5.0, 5.0, 2.0) == doctest::Approx(0.0));
    CHECK(rbar(5.0, 5.0, 2.0) == doctest::Approx(0.73575888234288467).epsilon(1e-15));
    CHECK(kbar(3.0, 1.0, 2.0) == doctest::Approx(1.0));
    CHECK(rbar(3.0, 1.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
    for (double zeta : {0.3, 1.0, 7.5})
        CHECK(rbar(4.2, 4.2, zeta) == doctest::Approx(zeta / std::exp(1.0)).epsilon(1e-15));
    CHECK_THROWS_AS(kbar(1.0, 0.0, 1e-12), std::invalid_argument);
    CHECK_THROWS_AS(rbar(1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("r_total") {
    CHECK(r_total({2.5}, {1.0}, 1.0, 0.7) == doctest::Approx(rbar(2.5, 1.0, 0.7)).epsilon(1e-15));
    CHECK(r_total({3.0, 3.0}, {0.5, 0.5}, 1.0, 2.0) ==
          doctest::Approx(rbar(3.0, 1.0, 2.0)).epsilon(1e-15));
    // 0.5*(2/e) + 0.5*2, frozen
    CHECK(r_total({1.0, 3.0}, {0.5, 0.5}, 1.0, 2.0) ==
          doctest::Approx(1.3678794411714423).epsilon(1e-15));
    CHECK_THROWS_AS(r_total({1.0}, {0.5, 0.5}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("build_cut: closed form at kbar zero") {
    MicrogridInstance inst = one_tgr_instance(2);
    CutAnchor anchor{all_off_schedule(inst), 4.0, 1.5};
    ScenarioEvaluation ev;
    ev.q = 4.0;  // q = mu so kbar = 0
    ev.dq_du.assign(1, std::vector<double>(2, 0.0));
    Cut cut = build_cut(anchor, {ev}, {1.0}, {});
    double einv = 0.36787944117144233;
    CHECK(cut.alpha[0][0] == doctest::Approx(0.0));
    CHECK(cut.beta == doctest::Approx(-einv).epsilon(1e-14));
    CHECK(cut.gamma == doctest::Approx(einv).epsilon(1e-14));
    CHECK(cut.anchor_value == doctest::Approx(1.5 * einv).epsilon(1e-14));

    std::vector<std::vector<double>> u0(1, std::vector<double>(2, 0.0));
    CHECK(evaluate_cut(cut, u0, 4.0, 1.5) == doctest::Approx(cut.anchor_value).epsilon(1e-15));
    CHECK(evaluate_cut(cut, u0, 4.0, 1.5) ==
          doctest::Approx(r_total({4.0}, {1.0}, 4.0, 1.5)).epsilon(1e-14));
}

TEST_CASE("build_cut: guard violation throws") {
    MicrogridInstance inst = one_tgr_instance(2);
    ScenarioEvaluation ev;
    ev.q = 100.0;
    ev.dq_du.assign(1, std::vector<double>(2, 0.0));
    AmbiguityParams amb;  // k_max 50
    CHECK_THROWS_AS(build_cut({all_off_schedule(inst), 0.0, 0.5}, {ev}, {1.0}, amb),
                    std::logic_error);
}

TEST_CASE("build_cut: coefficients match finite differences of r_total") {
    auto gen = oracle::rng(4242);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        int G = 1 + static_cast<int>(gen() % 2), H = 2 + static_cast<int>(gen() % 2);
        int S = 2 + static_cast<int>(gen() % 2);
        MicrogridInstance inst = testgen::random_tiny_instance(gen, G, H);
        ScenarioSet scen = testgen::random_scenarios(gen, S, H);
        std::vector<double> pi;
        for (const auto& s : scen.scenarios) pi.push_back(s.probability);

        // anchor at a random valid schedule (rejection per unit, canonical v;
        // all-off is the fallback), sane (mu, zeta)
        CommitmentSchedule x = all_off_schedule(inst);
        for (int g = 0; g < G; ++g) {
            CommitmentSchedule probe = x;
            for (int attempt = 0; attempt < 64; ++attempt) {
                for (int h = 0; h < H; ++h) probe.u[g][h] = gen() % 2;
                for (int h = 0; h < H; ++h) {
                    char prev = h == 0 ? static_cast<char>(inst.tgrs[g].initial_commitment)
                                       : probe.u[g][h - 1];
                    probe.v[g][h] = probe.u[g][h] > prev;
                }
                if (validate_commitment(probe, inst).empty()) break;
                probe.u[g] = x.u[g];
                probe.v[g] = x.v[g];
            }
            x = probe;
        }
        REQUIRE(validate_commitment(x, inst).empty());
        auto evals = evaluate_scenarios(inst, scen, x);
        double qmax = 0.0;
        for (const auto& e : evals) qmax = std::max(qmax, e.q);
        double mu = qmax * (0.2 + 0.6 * u01(gen));
        double zeta = 0.3 + 1.2 * u01(gen);
        Cut cut = build_cut({x, mu, zeta}, evals, pi, {});

        auto rt_at = [&](const std::vector<std::vector<double>>& u, double m, double z) {
            std::vector<double> qs;
            for (const auto& s : scen.scenarios) {
                DailyProfile prof = scenario_profile(s);
                qs.push_back(evaluate_q_relaxed(u, prof, inst).cost);
            }
            return r_total(qs, pi, m, z);
        };
        std::vector<std::vector<double>> u0(G, std::vector<double>(H, 0.0));
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < H; ++h) u0[g][h] = x.u[g][h];

        const double h_fd = 1e-6;
        double base_scale = std::max(1.0, std::abs(cut.anchor_value));

        double fd_beta = (rt_at(u0, mu + h_fd, zeta) - rt_at(u0, mu - h_fd, zeta)) / (2 * h_fd);
        double fd_gamma = (rt_at(u0, mu, zeta + h_fd) - rt_at(u0, mu, zeta - h_fd)) / (2 * h_fd);
        CHECK(std::abs(cut.beta - fd_beta) <= 1e-5 * std::max(1.0, std::abs(fd_beta)));
        CHECK(std::abs(cut.gamma - fd_gamma) <= 1e-5 * std::max(1.0, std::abs(fd_gamma)));

        for (int g = 0; g < G; ++g)
            for (int hh = 0; hh < H; ++hh) {
                auto up = u0, dn = u0;
                up[g][hh] += h_fd;
                dn[g][hh] -= h_fd;
                double f0 = rt_at(u0, mu, zeta);
                double fwd = (rt_at(up, mu, zeta) - f0) / h_fd;
                double bwd = (f0 - rt_at(dn, mu, zeta)) / h_fd;
                if (std::abs(fwd - bwd) > 1e-4 * base_scale) {
                    // second-stage kink right at the binary point: the cut
                    // slope must sit inside the one-sided bracket
                    double lo = std::min(fwd, bwd) - 1e-5 * base_scale;
                    double hi = std::max(fwd, bwd) + 1e-5 * base_scale;
                    CHECK(cut.alpha[g][hh] >= lo);
                    CHECK(cut.alpha[g][hh] <= hi);
                } else {
                    double fd = 0.5 * (fwd + bwd);
                    CHECK_MESSAGE(std::abs(cut.alpha[g][hh]) - std::abs(fd) <=
                                      1e-5 * std::max(1.0, std::abs(fd)),
                                  "trial ", trial);
                    CHECK(std::abs(cut.alpha[g][hh] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
                }
                ++checked;
            }
    }
    CHECK(checked >= 20);
}

TEST_CASE("build_cut: under-estimates r_total at random probes") {
    auto gen = oracle::rng(909);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    MicrogridInstance inst = one_tgr_instance(3);
    ScenarioSet scen = testgen::random_scenarios(gen, 3, 3);
    std::vector<double> pi;
    for (const auto& s : scen.scenarios) pi.push_back(s.probability);

    CommitmentSchedule x = all_off_schedule(inst);
    x.u[0] = {1, 1, 0};
    x.v[0] = {1, 0, 0};
    auto evals = evaluate_scenarios(inst, scen, x);
    std::vector<double> qs;
    double qmax = 0.0, qmin = 1e300;
    for (const auto& e : evals) {
        qs.push_back(e.q);
        qmax = std::max(qmax, e.q);
        qmin = std::min(qmin, e.q);
    }
    double span = std::max(qmax, 1.0);
    Cut cut = build_cut({x, 0.4 * qmax, 0.8}, evals, pi, {});

    for (int probe = 0; probe < 200; ++probe) {
        std::vector<std::vector<double>> u(1, std::vector<double>(3));
        for (auto& v : u[0]) v = u01(gen);
        double mu = qmin - 0.5 * span + 1.5 * span * u01(gen);
        double zeta = span / 10.0 + 3.0 * span * u01(gen);
        std::vector<double> qp;
        for (const auto& s : scen.scenarios)
            qp.push_back(evaluate_q_relaxed(u, scenario_profile(s), inst).cost);
        double rt = r_total(qp, pi, mu, zeta);
        double rhs = evaluate_cut(cut, u, mu, zeta);
        CHECK(rhs <= rt + 1e-9 * std::max(1.0, std::abs(rt)));
    }
}

TEST_CASE("worst_case_expectation") {
    SUBCASE("rho zero is the nominal expectation") {
        auto [v, d] = worst_case_expectation({1.0, 5.0, 2.0}, {0.2, 0.3, 0.5}, 0.0);
        CHECK(v == doctest::Approx(0.2 + 1.5 + 1.0).epsilon(1e-14));
        CHECK(d.probabilities[1] == 0.3);
        CHECK(d.kl_to_nominal == 0.0);
    }
    SUBCASE("huge rho approaches the maximum") {
        auto [v, d] = worst_case_expectation({1.0, 5.0, 2.0}, {0.2, 0.3, 0.5}, 50.0);
        CHECK(relerr(v, 5.0) <= 1e-4);
        CHECK(d.kl_to_nominal <= 50.0 + 1e-9);
    }
    SUBCASE("frozen two-point example") {
        auto [v, d] = worst_case_expectation({0.0, 1.0}, {0.5, 0.5}, 0.1);
        CHECK(v == doctest::Approx(0.71979462616140977).epsilon(1e-9));
        CHECK(d.probabilities[1] == doctest::Approx(0.71979462616140977).epsilon(1e-9));
    }
    SUBCASE("distribution invariants hold exactly") {
        auto gen = oracle::rng(5005);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int trial = 0; trial < 60; ++trial) {
            int S = 2 + static_cast<int>(gen() % 5);
            std::vector<double> q(S), pi(S);
            double tot = 0.0;
            for (int w = 0; w < S; ++w) {
                q[w] = 100.0 * u01(gen);
                pi[w] = 0.05 + u01(gen);
                tot += pi[w];
            }
            double acc = 0.0;
            for (int w = 0; w < S; ++w) {
                pi[w] = w + 1 == S ? 1.0 - acc : pi[w] / tot;
                acc += pi[w];
            }
            double rho = std::pow(10.0, -2.0 + 3.0 * u01(gen));
            auto [v, d] = worst_case_expectation(q, pi, rho);
            double sum = 0.0;
            for (double p : d.probabilities) sum += p;
            CHECK(sum == 1.0);  // pinned exactly
            CHECK(d.kl_to_nominal <= rho + 1e-9);
            CHECK(v >= *std::min_element(q.begin(), q.end()) - 1e-9);
            CHECK(v <= *std::max_element(q.begin(), q.end()) + 1e-9);
            CHECK(v == d.attained_expectation);
        }
    }
    SUBCASE("matches the dual grid oracle") {
        auto gen = oracle::rng(6006);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        for (int trial = 0; trial < 25; ++trial) {
            int S = 2 + static_cast<int>(gen() % 4);
            std::vector<double> q(S), pi(S);
            double tot = 0.0;
            for (int w = 0; w < S; ++w) {
                q[w] = 50.0 * u01(gen);
                pi[w] = 0.1 + u01(gen);
                tot += pi[w];
            }
            double acc = 0.0;
            for (int w = 0; w < S; ++w) {
                pi[w] = w + 1 == S ? 1.0 - acc : pi[w] / tot;
                acc += pi[w];
            }
            for (double rho : {0.05, 0.2, 1.0}) {
                double mine = worst_case_expectation(q, pi, rho).first;
                double grid = oracle::worst_case_expectation_dual_grid(q, pi, rho);
                CHECK_MESSAGE(relerr(mine, grid) <= 1e-5, "trial ", trial, " rho ", rho);
            }
        }
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(worst_case_expectation({1.0}, {0.5, 0.5}, 0.1), std::invalid_argument);
        CHECK_THROWS_AS(worst_case_expectation({1.0, 2.0}, {1.0, 0.0}, 0.1),
                        std::invalid_argument);
        CHECK_THROWS_AS(worst_case_expectation({1.0, 2.0}, {0.5, 0.5}, -0.1),
                        std::invalid_argument);
    }
}

TEST_CASE("dual reformulation meets the tilting primal") {
    auto gen = oracle::rng(7007);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        int S = 2 + static_cast<int>(gen() % 4);
        std::vector<double> q(S), pi(S);
        double tot = 0.0;
        for (int w = 0; w < S; ++w) {
            q[w] = 100.0 * u01(gen);
            pi[w] = 0.1 + u01(gen);
            tot += pi[w];
        }
        double acc = 0.0;
        for (int w = 0; w < S; ++w) {
            pi[w] = w + 1 == S ? 1.0 - acc : pi[w] / tot;
            acc += pi[w];
        }
        for (double rho : {0.05, 0.2, 1.0}) {
            double primal = worst_case_expectation(q, pi, rho).first;
            double dual = oracle::dual_surface_min(q, pi, rho);
            CHECK_MESSAGE(relerr(dual, primal) <= 1e-4, "trial ", trial, " rho ", rho, " primal ",
                          primal, " dual ", dual);
        }
    }
}

TEST_CASE("solve_master: no cuts pushes mu and zeta to the guard corner") {
    MicrogridInstance inst = one_tgr_instance(2);
    AmbiguityParams amb;
    amb.rho = 0.5;
    MasterSolution ms = solve_master({}, inst, 10.0, amb);
    for (int h = 0; h < 2; ++h) CHECK(ms.schedule.u[0][h] == 0);
    CHECK(ms.mu == doctest::Approx(-10.0).epsilon(1e-8));
    CHECK(ms.zeta == doctest::Approx(2.0 * 10.0 / amb.k_max).epsilon(1e-8));
    CHECK(ms.theta == doctest::Approx(0.0));
    CHECK(ms.objective == doctest::Approx(-10.0 + 0.5 * 0.4).epsilon(1e-8));
    // guard row tight: q_max - mu = k_max * zeta
    CHECK(10.0 - ms.mu == doctest::Approx(amb.k_max * ms.zeta).epsilon(1e-7));

    MasterSolution again = solve_master({}, inst, 10.0, amb);
    CHECK(again.objective == ms.objective);
    CHECK(again.mu == ms.mu);
}

TEST_CASE("solve_master: honours cuts and commitment validity") {
    MicrogridInstance inst = one_tgr_instance(3);
    inst.tgrs[0].initial_commitment = 1;
    inst.tgrs[0].min_down_h = 2;
    AmbiguityParams amb;
    amb.rho = 0.3;

    Cut cut;
    cut.alpha.assign(1, std::vector<double>(3, 0.0));
    cut.beta = -0.4;
    cut.gamma = 0.1;
    cut.anchor.schedule = all_off_schedule(inst);
    cut.anchor.mu = 1.0;
    cut.anchor.zeta = 1.0;
    cut.anchor_value = 2.0;

    MasterSolution ms = solve_master({cut}, inst, 8.0, amb);
    CHECK(validate_commitment(ms.schedule, inst).empty());
    std::vector<std::vector<double>> u(1, std::vector<double>(3));
    for (int h = 0; h < 3; ++h) u[0][h] = ms.schedule.u[0][h];
    CHECK(ms.theta >= evaluate_cut(cut, u, ms.mu, ms.zeta) - 1e-6);
}

TEST_CASE("solve_rkl_muc matches exhaustive enumeration on tiny instances") {
    auto gen = oracle::rng(2024);
    int done = 0;
    for (int trial = 0; trial < 6; ++trial) {
        int G = 1 + static_cast<int>(gen() % 2);
        int H = 2 + static_cast<int>(gen() % 2);
        int S = 2 + static_cast<int>(gen() % 2);
        MicrogridInstance inst = testgen::random_tiny_instance(gen, G, H);
        ScenarioSet scen = testgen::random_scenarios(gen, S, H);
        double rho = trial % 2 == 0 ? 0.3 : 1.0;

        SolverConfig cfg;
        cfg.ambiguity.rho = rho;
        UcSolution sol = solve_rkl_muc(inst, scen, cfg);
        oracle::UcEnumeration ref = oracle::uc_enumeration(inst, scen, rho);

        CHECK_MESSAGE(relerr(sol.objective, ref.objective) <= 1e-4, "trial ", trial, " got ",
                      sol.objective, " want ", ref.objective);
        CHECK(sol.trace.status == "converged");
        CHECK(sol.objective >= sol.lb - 1e-7);
        CHECK(sol.objective <= sol.ub + 1e-7);
        CHECK(validate_commitment(sol.schedule, inst).empty());
        ++done;
    }
    CHECK(done == 6);
}

TEST_CASE("trace bookkeeping: bounds move monotonically, guard respected") {
    auto gen = oracle::rng(31);
    MicrogridInstance inst = testgen::random_tiny_instance(gen, 2, 3);
    ScenarioSet scen = testgen::random_scenarios(gen, 3, 3);
    SolverConfig cfg;
    cfg.ambiguity.rho = 0.4;
    UcSolution sol = solve_rkl_muc(inst, scen, cfg);

    double prev_lb_p1 = -1e300, prev_lb_p2 = -1e300, prev_ub = 1e300;
    for (const auto& rec : sol.trace.records) {
        if (rec.phase == 1) {
            CHECK(rec.lb >= prev_lb_p1 - 1e-9);
            prev_lb_p1 = rec.lb;
        } else {
            CHECK(rec.lb >= prev_lb_p2 - 1e-9);
            prev_lb_p2 = rec.lb;
        }
        CHECK(rec.ub <= prev_ub + 1e-9);
        prev_ub = rec.ub;
    }
    CHECK(sol.trace.max_kbar_seen <= cfg.ambiguity.k_max + 1e-6);
    CHECK(sol.ub - sol.lb <= 1e-9 * std::max(1.0, std::abs(sol.ub)) + 1e-12);
    CHECK(sol.trace.q_max > 0.0);

    // every emitted cut anchors inside the guard region
    for (const auto& cut : sol.cuts) {
        auto evals = evaluate_scenarios(inst, scen, cut.anchor.schedule);
        for (const auto& e : evals)
            CHECK((e.q - cut.anchor.mu) / cut.anchor.zeta <= cfg.ambiguity.k_max + 1e-6);
    }
}

TEST_CASE("objective is non-decreasing in rho") {
    auto gen = oracle::rng(88);
    MicrogridInstance inst = testgen::random_tiny_instance(gen, 2, 3);
    ScenarioSet scen = testgen::random_scenarios(gen, 3, 3);
    double prev = -1e300;
    for (double rho : {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}) {
        SolverConfig cfg;
        cfg.ambiguity.rho = rho;
        UcSolution sol = solve_rkl_muc(inst, scen, cfg);
        CHECK_MESSAGE(sol.objective >= prev - 1e-9, "rho ", rho);
        prev = sol.objective;
    }
}

TEST_CASE("rho zero delegates to the risk-neutral solver") {
    auto gen = oracle::rng(55);
    MicrogridInstance inst = testgen::random_tiny_instance(gen, 1, 3);
    ScenarioSet scen = testgen::random_scenarios(gen, 2, 3);
    SolverConfig cfg;
    cfg.ambiguity.rho = 0.0;
    UcSolution robust = solve_rkl_muc(inst, scen, cfg);
    UcSolution neutral = solve_suc(inst, scen, cfg);
    CHECK(robust.objective == doctest::Approx(neutral.objective).epsilon(1e-12));
    CHECK(robust.schedule.u == neutral.schedule.u);
    CHECK(robust.worst_case.kl_to_nominal == 0.0);
}

TEST_CASE("solve_suc") {
    SUBCASE("grid-only optimum when generation cannot compete") {
        MicrogridInstance inst = one_tgr_instance(2);
        inst.tgrs[0].c_p_per_kwh = 0.5;  // price never exceeds 0.2
        ScenarioSet scen;
        scen.horizon = 2;
        Scenario s;
        s.probability = 1.0;
        s.eta = {2.0, 3.0};
        s.lambda = {0.1, 0.2};
        scen.scenarios = {s};
        SolverConfig cfg;
        UcSolution sol = solve_suc(inst, scen, cfg);
        CHECK(sol.objective == doctest::Approx(0.1 * 2 + 0.2 * 3).epsilon(1e-9));
        for (int h = 0; h < 2; ++h) CHECK(sol.schedule.u[0][h] == 0);
    }
    SUBCASE("matches enumeration") {
        auto gen = oracle::rng(616);
        for (int trial = 0; trial < 4; ++trial) {
            MicrogridInstance inst = testgen::random_tiny_instance(gen, 2, 2);
            ScenarioSet scen = testgen::random_scenarios(gen, 3, 2);
            SolverConfig cfg;
            UcSolution sol = solve_suc(inst, scen, cfg);
            oracle::UcEnumeration ref = oracle::uc_enumeration(inst, scen, 0.0);
            CHECK(relerr(sol.objective, ref.objective) <= 1e-6);
        }
    }
    SUBCASE("lower bound climbs") {
        auto gen = oracle::rng(617);
        MicrogridInstance inst = testgen::random_tiny_instance(gen, 2, 3);
        ScenarioSet scen = testgen::random_scenarios(gen, 3, 3);
        UcSolution sol = solve_suc(inst, scen, SolverConfig{});
        double prev = -1e300;
        for (const auto& rec : sol.trace.records) {
            CHECK(rec.lb >= prev - 1e-9);
            prev = rec.lb;
        }
        CHECK(sol.trace.status == "converged");
    }
}

TEST_CASE("scaling all costs scales the objective and keeps the schedule") {
    auto gen = oracle::rng(99);
    MicrogridInstance inst = testgen::random_tiny_instance(gen, 2, 3);
    ScenarioSet scen = testgen::random_scenarios(gen, 2, 3);
    SolverConfig cfg;
    cfg.ambiguity.rho = 0.35;
    UcSolution base = solve_rkl_muc(inst, scen, cfg);

    const double k = 3.7;
    MicrogridInstance inst2 = inst;
    for (auto& t : inst2.tgrs) {
        t.c_p_per_kwh *= k;
        t.c_u_per_h *= k;
        t.c_v *= k;
    }
    ScenarioSet scen2 = scen;
    for (auto& s : scen2.scenarios)
        for (double& lam : s.lambda) lam *= k;
    UcSolution scaled = solve_rkl_muc(inst2, scen2, cfg);
    CHECK(relerr(scaled.objective, k * base.objective) <= 1e-7);
    CHECK(scaled.schedule.u == base.schedule.u);
}

TEST_CASE("solution serialization") {
    auto gen = oracle::rng(77);
    MicrogridInstance inst = testgen::random_tiny_instance(gen, 1, 2);
    ScenarioSet scen = testgen::random_scenarios(gen, 2, 2);
    SolverConfig cfg;
    cfg.ambiguity.rho = 0.2;
    UcSolution sol = solve_rkl_muc(inst, scen, cfg);

    auto j = nlohmann::json::parse(solution_to_json(sol));
    CHECK(j["rho"].get<double>() == 0.2);
    CHECK(j["objective"].get<double>() == sol.objective);
    CHECK(j["lb"].get<double>() == sol.lb);
    CHECK(j["ub"].get<double>() == sol.ub);
    CHECK(j["iterations"].get<int>() == sol.trace.iterations);
    CHECK(j["schedule"]["u"].size() == 1);
    CHECK(j["schedule"]["u"][0].size() == 2);
    CHECK(j["schedule"]["v"][0].size() == 2);
    CHECK(j["worst_case_distribution"]["probabilities"].size() == 2);
    CHECK(j["timing"]["wall_ms"].get<double>() >= 0.0);

    const char* path = "dro_sol_test.json";
    save_solution(sol, path);
    std::ifstream in(path);
    nlohmann::json j2 = nlohmann::json::parse(in);
    in.close();
    std::remove(path);
    CHECK(j2["objective"].get<double>() == sol.objective);
    CHECK_THROWS_AS(save_solution(sol, "/no_such_dir_zz/x.json"), io_error);
}
