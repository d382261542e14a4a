#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "drouc/dispatch.hpp"
#include "drouc/errors.hpp"
#include "oracles.hpp"

using namespace drouc;

namespace {

MicrogridInstance one_unit_instance() {
    MicrogridInstance inst;
    inst.horizon = 4;
    TgrParams g;
    g.id = "g0";
    g.p_min_kw = 1.0;
    g.p_max_kw = 5.0;
    g.min_up_h = 1;
    g.min_down_h = 1;
    g.c_p_per_kwh = 0.10;
    g.c_u_per_h = 0.02;
    g.c_v = 0.05;
    inst.tgrs.push_back(g);
    return inst;
}

// The hourly dispatch written out as the LP it solves.
opt::LinearProgram hourly_lp(const std::vector<TgrParams>& tgrs, const std::vector<double>& u_h,
                             double eta, double lambda, double cap) {
    const int G = static_cast<int>(tgrs.size());
    opt::LinearProgram lp(G + 2);  // p_g..., p_b, p_s
    std::vector<double> balance(G + 2, 1.0);
    balance[G + 1] = -1.0;
    for (int g = 0; g < G; ++g) {
        lp.objective[g] = tgrs[g].c_p_per_kwh;
        lp.lower[g] = u_h[g] * tgrs[g].p_min_kw;
        lp.upper[g] = u_h[g] * tgrs[g].p_max_kw;
    }
    lp.objective[G] = lambda;
    lp.upper[G] = cap;
    lp.add_row(std::move(balance), opt::Sense::EQ, eta);
    return lp;
}

}  // namespace

TEST_CASE("validate_commitment: all-off schedule is valid") {
    MicrogridInstance inst = one_unit_instance();
    CHECK(validate_commitment(all_off_schedule(inst), inst).empty());
}

TEST_CASE("validate_commitment: catches min-uptime violation") {
    MicrogridInstance inst = one_unit_instance();
    inst.tgrs[0].min_up_h = 3;
    CommitmentSchedule s = all_off_schedule(inst);
    s.u[0] = {0, 1, 0, 0};  // start at h=1, off again at h=2
    s.v[0] = {0, 1, 0, 0};
    auto bad = validate_commitment(s, inst);
    REQUIRE(!bad.empty());
    CHECK(bad[0].find("min-uptime") != std::string::npos);
}

TEST_CASE("validate_commitment: three-hour run satisfies T_up=3") {
    MicrogridInstance inst = one_unit_instance();
    inst.tgrs[0].min_up_h = 3;
    inst.horizon = 5;
    CommitmentSchedule s;
    s.u = {{0, 1, 1, 1, 0}};
    s.v = {{0, 1, 0, 0, 0}};
    CHECK(validate_commitment(s, inst).empty());
}

TEST_CASE("validate_commitment: start-up flag required") {
    MicrogridInstance inst = one_unit_instance();
    CommitmentSchedule s = all_off_schedule(inst);
    s.u[0] = {0, 1, 1, 1};  // v stays zero
    auto bad = validate_commitment(s, inst);
    REQUIRE(!bad.empty());
    CHECK(bad[0].find("start-up") != std::string::npos);
}

TEST_CASE("validate_commitment: min-downtime from initial commitment") {
    MicrogridInstance inst = one_unit_instance();
    inst.tgrs[0].min_down_h = 2;
    inst.tgrs[0].initial_commitment = 1;
    CommitmentSchedule s = all_off_schedule(inst);
    s.u[0] = {0, 1, 1, 1};  // off at h=0, back on at h=1: downtime 1 < 2
    s.v[0] = {0, 1, 0, 0};
    auto bad = validate_commitment(s, inst);
    REQUIRE(!bad.empty());
    CHECK(bad[0].find("min-downtime") != std::string::npos);
}

TEST_CASE("validate_commitment: non-binary entries flagged") {
    MicrogridInstance inst = one_unit_instance();
    CommitmentSchedule s = all_off_schedule(inst);
    s.u[0][1] = 2;
    auto bad = validate_commitment(s, inst);
    CHECK(!bad.empty());
}

TEST_CASE("validate_commitment: shape mismatch throws") {
    MicrogridInstance inst = one_unit_instance();
    CommitmentSchedule s = all_off_schedule(inst);
    s.u[0].pop_back();
    CHECK_THROWS_AS(validate_commitment(s, inst), std::invalid_argument);
}

TEST_CASE("hourly_dispatch: committed unit serves cheap demand") {
    MicrogridInstance inst = one_unit_instance();
    auto hd = hourly_dispatch(inst.tgrs, {1.0}, 3.0, 0.20, inst.purchase_limit_kw);
    CHECK(hd.p_g[0] == doctest::Approx(3.0));
    CHECK(hd.p_b == doctest::Approx(0.0));
    CHECK(hd.p_s == doctest::Approx(0.0));
    CHECK(hd.cost == doctest::Approx(0.30));
    CHECK(hd.balance_price == doctest::Approx(0.10));  // unit is marginal
    CHECK(hd.phi[0] == doctest::Approx(0.0));          // interior dispatch
}

TEST_CASE("hourly_dispatch: cheap grid forces the unit to its minimum") {
    MicrogridInstance inst = one_unit_instance();
    auto hd = hourly_dispatch(inst.tgrs, {1.0}, 3.0, 0.05, inst.purchase_limit_kw);
    CHECK(hd.p_g[0] == doctest::Approx(1.0));
    CHECK(hd.p_b == doctest::Approx(2.0));
    CHECK(hd.cost == doctest::Approx(0.20));
    CHECK(hd.balance_price == doctest::Approx(0.05));
    CHECK(hd.phi[0] == doctest::Approx(0.05));  // (c_p - lambda) * p_min
}

TEST_CASE("hourly_dispatch: surplus spills for free") {
    MicrogridInstance inst = one_unit_instance();
    auto hd = hourly_dispatch(inst.tgrs, {1.0}, 0.5, 0.20, inst.purchase_limit_kw);
    CHECK(hd.p_g[0] == doctest::Approx(1.0));
    CHECK(hd.p_s == doctest::Approx(0.5));
    CHECK(hd.p_b == doctest::Approx(0.0));
    CHECK(hd.cost == doctest::Approx(0.10));
    CHECK(hd.balance_price == doctest::Approx(0.0));
    CHECK(hd.phi[0] == doctest::Approx(0.10));  // forced minimum at m = 0
}

TEST_CASE("hourly_dispatch: uncommitted unit phi is the one-sided derivative") {
    MicrogridInstance inst = one_unit_instance();
    SUBCASE("cheap unit would displace the grid at p_max") {
        auto hd = hourly_dispatch(inst.tgrs, {0.0}, 3.0, 0.20, inst.purchase_limit_kw);
        CHECK(hd.p_g[0] == doctest::Approx(0.0));
        CHECK(hd.p_b == doctest::Approx(3.0));
        CHECK(hd.phi[0] == doctest::Approx((0.10 - 0.20) * 5.0));
    }
    SUBCASE("dear unit would only add its forced minimum") {
        auto hd = hourly_dispatch(inst.tgrs, {0.0}, 3.0, 0.05, inst.purchase_limit_kw);
        CHECK(hd.phi[0] == doctest::Approx((0.10 - 0.05) * 1.0));
    }
}

TEST_CASE("hourly_dispatch: tie between unit and grid prefers the unit") {
    MicrogridInstance inst = one_unit_instance();
    auto hd = hourly_dispatch(inst.tgrs, {1.0}, 3.0, 0.10, inst.purchase_limit_kw);
    CHECK(hd.p_g[0] == doctest::Approx(3.0));
    CHECK(hd.p_b == doctest::Approx(0.0));
}

TEST_CASE("hourly_dispatch: negative price pins purchases at the cap") {
    MicrogridInstance inst = one_unit_instance();
    inst.purchase_limit_kw = 10.0;
    auto hd = hourly_dispatch(inst.tgrs, {0.0}, 2.0, -0.03, 10.0);
    CHECK(hd.p_b == doctest::Approx(10.0));
    CHECK(hd.p_s == doctest::Approx(8.0));
    CHECK(hd.cost == doctest::Approx(-0.30));
    CHECK_THROWS_AS(
        hourly_dispatch(inst.tgrs, {0.0}, 2.0, -0.03, std::numeric_limits<double>::infinity()),
        std::invalid_argument);
}

TEST_CASE("hourly_dispatch: infeasible beyond cap plus capacity") {
    MicrogridInstance inst = one_unit_instance();
    CHECK_THROWS_AS(hourly_dispatch(inst.tgrs, {1.0}, 9.0, 0.2, 3.0), infeasible_error);
    CHECK_NOTHROW(hourly_dispatch(inst.tgrs, {1.0}, 8.0, 0.2, 3.0));
}

TEST_CASE("evaluate_q: grid-only service for the all-off schedule") {
    MicrogridInstance inst = one_unit_instance();
    DailyProfile xi;
    xi.date = {2024, 1, 1};
    xi.eta = {2.0, 3.0, -1.5, 0.0};
    xi.lambda = {0.1, 0.2, 0.3, 0.4};
    auto res = evaluate_q(all_off_schedule(inst), xi, inst);
    CHECK(res.p_b[0] == doctest::Approx(2.0));
    CHECK(res.p_b[1] == doctest::Approx(3.0));
    CHECK(res.p_b[2] == doctest::Approx(0.0));
    CHECK(res.p_s[2] == doctest::Approx(1.5));  // negative net load spills
    CHECK(res.cost == doctest::Approx(0.1 * 2 + 0.2 * 3));
}

TEST_CASE("merit order matches the LP kernel on random hourly instances") {
    auto gen = oracle::rng(8675309);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int infeasible_seen = 0;
    for (int trial = 0; trial < 400; ++trial) {
        int G = 1 + static_cast<int>(gen() % 4);
        std::vector<TgrParams> tgrs(G);
        std::vector<double> u_h(G);
        for (int g = 0; g < G; ++g) {
            tgrs[g].p_min_kw = 0.2 + 2.0 * unit(gen);
            tgrs[g].p_max_kw = tgrs[g].p_min_kw + 3.0 * unit(gen);
            tgrs[g].c_p_per_kwh = 0.02 + 0.25 * unit(gen);
            u_h[g] = (unit(gen) < 0.3) ? 0.0 : (unit(gen) < 0.25 ? unit(gen) : 1.0);
        }
        double eta = -1.0 + 14.0 * unit(gen);
        double lambda = 0.01 + 0.3 * unit(gen);
        double cap = (unit(gen) < 0.3) ? 4.0 * unit(gen) : std::numeric_limits<double>::infinity();

        opt::LinearProgram lp = hourly_lp(tgrs, u_h, eta, lambda,
                                          std::isfinite(cap) ? cap : 1e9);
        auto truth = opt::solve_lp(lp);
        HourlyDispatch hd;
        bool infeasible = false;
        try {
            hd = hourly_dispatch(tgrs, u_h, eta, lambda, cap);
        } catch (const infeasible_error&) {
            infeasible = true;
        }
        if (infeasible) {
            CHECK_MESSAGE(truth.status == opt::SolveStatus::Infeasible, "trial ", trial);
            ++infeasible_seen;
            continue;
        }
        REQUIRE_MESSAGE(truth.status == opt::SolveStatus::Optimal, "trial ", trial);
        double scale = std::max(1.0, std::abs(truth.objective));
        CHECK_MESSAGE(std::abs(hd.cost - truth.objective) <= 1e-7 * scale, "trial ", trial,
                      " merit ", hd.cost, " lp ", truth.objective);
        double balance = hd.p_b - hd.p_s;
        for (int g = 0; g < G; ++g) balance += hd.p_g[g];
        CHECK(balance == doctest::Approx(eta).epsilon(1e-9));
        // complementary slackness of the reported balance dual
        if (hd.p_s > 1e-9) CHECK(hd.balance_price == doctest::Approx(0.0));
        bool purchase_interior = hd.p_b > 1e-9 && (!std::isfinite(cap) || hd.p_b < cap - 1e-9);
        if (purchase_interior)
            CHECK(hd.balance_price == doctest::Approx(lambda).epsilon(1e-12));
    }
    CHECK(infeasible_seen > 0);
}

TEST_CASE("dispatch_sensitivity matches finite differences away from kinks") {
    auto gen = oracle::rng(5551212);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MicrogridInstance inst;
    inst.horizon = 3;
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        int G = 1 + static_cast<int>(gen() % 3);
        inst.tgrs.assign(G, {});
        for (int g = 0; g < G; ++g) {
            inst.tgrs[g].id = "g" + std::to_string(g);
            inst.tgrs[g].p_min_kw = 0.3 + 1.5 * unit(gen);
            inst.tgrs[g].p_max_kw = inst.tgrs[g].p_min_kw + 2.5 * unit(gen);
            inst.tgrs[g].c_p_per_kwh = 0.03 + 0.2 * unit(gen);
        }
        DailyProfile xi;
        xi.eta.resize(inst.horizon);
        xi.lambda.resize(inst.horizon);
        for (int h = 0; h < inst.horizon; ++h) {
            xi.eta[h] = 10.0 * unit(gen) - 1.0;
            xi.lambda[h] = 0.02 + 0.25 * unit(gen);
        }
        std::vector<std::vector<double>> u(G, std::vector<double>(inst.horizon));
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < inst.horizon; ++h) u[g][h] = 0.05 + 0.9 * unit(gen);

        auto res = evaluate_q_relaxed(u, xi, inst);
        const double fd_h = 1e-6;
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < inst.horizon; ++h) {
                auto probe = u;
                probe[g][h] = u[g][h] + fd_h;
                double up = evaluate_q_relaxed(probe, xi, inst).cost;
                probe[g][h] = u[g][h] - fd_h;
                double dn = evaluate_q_relaxed(probe, xi, inst).cost;
                double fwd = (up - res.cost) / fd_h;
                double bwd = (res.cost - dn) / fd_h;
                double central = 0.5 * (fwd + bwd);
                double scale = std::max({1.0, std::abs(fwd), std::abs(bwd)});
                if (std::abs(fwd - bwd) > 1e-4 * scale) {
                    // kink: the subgradient must sit between the one-sided slopes
                    CHECK(res.phi[g][h] >= std::min(fwd, bwd) - 1e-5 * scale);
                    CHECK(res.phi[g][h] <= std::max(fwd, bwd) + 1e-5 * scale);
                    continue;
                }
                CHECK_MESSAGE(std::abs(res.phi[g][h] - central) <= 1e-5 * scale, "trial ", trial,
                              " g=", g, " h=", h, " phi=", res.phi[g][h], " fd=", central);
                ++checked;
            }
    }
    CHECK(checked > 500);
}

TEST_CASE("committing a cheap unit never raises Q") {
    auto gen = oracle::rng(31337);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        MicrogridInstance inst;
        inst.horizon = 4;
        TgrParams a;
        a.id = "a";
        a.p_min_kw = 0.1;
        a.p_max_kw = 3.0 + 2.0 * unit(gen);
        a.c_p_per_kwh = 0.01;  // cheaper than every price below
        inst.tgrs.push_back(a);
        DailyProfile xi;
        xi.eta.resize(4);
        xi.lambda.resize(4);
        for (int h = 0; h < 4; ++h) {
            xi.eta[h] = 6.0 * unit(gen);
            xi.lambda[h] = 0.05 + 0.2 * unit(gen);
        }
        CommitmentSchedule off = all_off_schedule(inst);
        CommitmentSchedule on = off;
        on.u[0].assign(4, 1);
        on.v[0][0] = 1;
        double q_off = evaluate_q(off, xi, inst).cost;
        double q_on = evaluate_q(on, xi, inst).cost;
        CHECK(q_on <= q_off + 1e-12);
    }
}

TEST_CASE("load_instance: parses a full config") {
    const char* path = "disp_test_instance.json";
    {
        std::ofstream out(path);
        out << R"({"horizon": 6, "purchase_limit_kw": 12.5, "tgrs": [
          {"id": "tgr1", "p_min_kw": 1, "p_max_kw": 4, "min_up_h": 2, "min_down_h": 2,
           "c_p_per_kwh": 0.09, "c_u_per_h": 0.05, "c_v": 0.4, "initial_commitment": 1},
          {"id": "tgr2", "p_min_kw": 0.5, "p_max_kw": 2, "min_up_h": 1, "min_down_h": 1,
           "c_p_per_kwh": 0.14, "c_u_per_h": 0.03, "c_v": 0.2}
        ]})";
    }
    MicrogridInstance inst = load_instance(path);
    std::remove(path);
    CHECK(inst.horizon == 6);
    CHECK(inst.purchase_limit_kw == doctest::Approx(12.5));
    REQUIRE(inst.num_tgrs() == 2);
    CHECK(inst.tgrs[0].id == "tgr1");
    CHECK(inst.tgrs[0].initial_commitment == 1);
    CHECK(inst.tgrs[1].initial_commitment == 0);  // default
    CHECK(inst.tgrs[1].c_p_per_kwh == doctest::Approx(0.14));
}

TEST_CASE("load_instance: rejects bad configs") {
    auto write_and_try = [](const char* text) {
        const char* path = "disp_test_bad.json";
        {
            std::ofstream out(path);
            out << text;
        }
        MicrogridInstance inst;
        try {
            inst = load_instance(path);
        } catch (...) {
            std::remove(path);
            throw;
        }
        std::remove(path);
        return inst;
    };
    CHECK_THROWS_AS(load_instance("missing_instance.json"), io_error);
    CHECK_THROWS_AS(write_and_try("{not json"), schema_error);
    CHECK_THROWS_AS(write_and_try(R"({"horizon": 0, "tgrs": []})"), schema_error);
    CHECK_THROWS_AS(write_and_try(R"({"tgrs": []})"), schema_error);  // horizon required
    CHECK_THROWS_AS(write_and_try(R"({"horizon": 4, "tgrs": [
        {"id": "x", "p_min_kw": 5, "p_max_kw": 2, "min_up_h": 1, "min_down_h": 1,
         "c_p_per_kwh": 0.1, "c_u_per_h": 0, "c_v": 0}]})"),
                    schema_error);  // p_min > p_max
    CHECK_THROWS_AS(write_and_try(R"({"horizon": 4, "tgrs": [
        {"id": "x", "p_min_kw": 1, "p_max_kw": 2, "min_up_h": 0, "min_down_h": 1,
         "c_p_per_kwh": 0.1, "c_u_per_h": 0, "c_v": 0}]})"),
                    schema_error);  // min_up < 1
}
