#include "drouc/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "drouc/errors.hpp"
#include "json.hpp"

namespace drouc {

MicrogridInstance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    MicrogridInstance inst;
    try {
        inst.horizon = j.at("horizon").get<int>();
        if (j.contains("purchase_limit_kw"))
            inst.purchase_limit_kw = j.at("purchase_limit_kw").get<double>();
        for (const auto& t : j.at("tgrs")) {
            TgrParams g;
            g.id = t.at("id").get<std::string>();
            g.p_min_kw = t.at("p_min_kw").get<double>();
            g.p_max_kw = t.at("p_max_kw").get<double>();
            g.min_up_h = t.at("min_up_h").get<int>();
            g.min_down_h = t.at("min_down_h").get<int>();
            g.c_p_per_kwh = t.at("c_p_per_kwh").get<double>();
            g.c_u_per_h = t.at("c_u_per_h").get<double>();
            g.c_v = t.at("c_v").get<double>();
            g.initial_commitment = t.value("initial_commitment", 0);
            inst.tgrs.push_back(std::move(g));
        }
    } catch (const nlohmann::json::exception& e) {
        throw schema_error(path + ": " + e.what());
    }
    if (inst.horizon < 1) throw schema_error(path + ": horizon must be >= 1");
    if (!(inst.purchase_limit_kw > 0.0))
        throw schema_error(path + ": purchase_limit_kw must be positive");
    for (const auto& g : inst.tgrs) {
        if (g.p_min_kw < 0.0 || g.p_min_kw > g.p_max_kw)
            throw schema_error(path + ": tgr " + g.id + " needs 0 <= p_min <= p_max");
        if (g.min_up_h < 1 || g.min_down_h < 1)
            throw schema_error(path + ": tgr " + g.id + " needs min up/down times >= 1");
        if (g.c_p_per_kwh < 0.0 || g.c_u_per_h < 0.0 || g.c_v < 0.0)
            throw schema_error(path + ": tgr " + g.id + " has a negative cost");
        if (g.initial_commitment != 0 && g.initial_commitment != 1)
            throw schema_error(path + ": tgr " + g.id + " initial_commitment must be 0 or 1");
    }
    return inst;
}

CommitmentSchedule all_off_schedule(const MicrogridInstance& instance) {
    CommitmentSchedule s;
    s.u.assign(instance.num_tgrs(), std::vector<char>(instance.horizon, 0));
    s.v.assign(instance.num_tgrs(), std::vector<char>(instance.horizon, 0));
    return s;
}

double first_stage_cost(const CommitmentSchedule& schedule, const MicrogridInstance& instance) {
    double c = 0.0;
    for (int g = 0; g < instance.num_tgrs(); ++g)
        for (int h = 0; h < instance.horizon; ++h) {
            c += instance.tgrs[g].c_u_per_h * schedule.u[g][h];
            c += instance.tgrs[g].c_v * schedule.v[g][h];
        }
    return c;
}

std::vector<std::string> validate_commitment(const CommitmentSchedule& schedule,
                                             const MicrogridInstance& instance) {
    const int G = instance.num_tgrs(), H = instance.horizon;
    if (static_cast<int>(schedule.u.size()) != G || static_cast<int>(schedule.v.size()) != G)
        throw std::invalid_argument("schedule unit count does not match instance");
    for (int g = 0; g < G; ++g)
        if (static_cast<int>(schedule.u[g].size()) != H ||
            static_cast<int>(schedule.v[g].size()) != H)
            throw std::invalid_argument("schedule horizon does not match instance");

    std::vector<std::string> bad;
    for (int g = 0; g < G; ++g) {
        const auto& tgr = instance.tgrs[g];
        const auto& u = schedule.u[g];
        const auto& v = schedule.v[g];
        auto u_at = [&](int h) { return h < 0 ? tgr.initial_commitment : static_cast<int>(u[h]); };
        for (int h = 0; h < H; ++h) {
            if (u[h] != 0 && u[h] != 1)
                bad.push_back("tgr " + tgr.id + ": u not binary at h=" + std::to_string(h));
            if (v[h] != 0 && v[h] != 1)
                bad.push_back("tgr " + tgr.id + ": v not binary at h=" + std::to_string(h));
        }
        for (int h = 0; h < H; ++h) {
            int turn_on = u_at(h) - u_at(h - 1);
            if (v[h] < turn_on)
                bad.push_back("tgr " + tgr.id + ": start-up not flagged at h=" + std::to_string(h));
            for (int nu = h; nu < std::min(h + tgr.min_up_h, H); ++nu)
                if (turn_on > u_at(nu)) {
                    bad.push_back("tgr " + tgr.id + ": min-uptime violated at h=" +
                                  std::to_string(nu) + " (started at h=" + std::to_string(h) + ")");
                    break;
                }
            int turn_off = u_at(h - 1) - u_at(h);
            for (int nu = h; nu < std::min(h + tgr.min_down_h, H); ++nu)
                if (turn_off > 1 - u_at(nu)) {
                    bad.push_back("tgr " + tgr.id + ": min-downtime violated at h=" +
                                  std::to_string(nu) + " (stopped at h=" + std::to_string(h) + ")");
                    break;
                }
        }
    }
    return bad;
}

HourlyDispatch hourly_dispatch(const std::vector<TgrParams>& tgrs,
                               const std::vector<double>& u_h, double eta_h, double lambda_h,
                               double purchase_limit) {
    const int G = static_cast<int>(tgrs.size());
    if (static_cast<int>(u_h.size()) != G)
        throw std::invalid_argument("commitment vector does not match unit count");
    if (lambda_h < 0.0 && !(purchase_limit < std::numeric_limits<double>::infinity()))
        throw std::invalid_argument("negative price without a purchase limit is unbounded");

    HourlyDispatch out;
    out.p_g.assign(G, 0.0);
    out.phi.assign(G, 0.0);

    // Mandatory minimums; negative-cost capacity runs flat out regardless of
    // demand because spilling is free.
    double served = 0.0;
    std::vector<double> lo(G), hi(G);
    for (int g = 0; g < G; ++g) {
        lo[g] = u_h[g] * tgrs[g].p_min_kw;
        hi[g] = u_h[g] * tgrs[g].p_max_kw;
        out.p_g[g] = (tgrs[g].c_p_per_kwh < 0.0) ? hi[g] : lo[g];
        served += out.p_g[g];
    }
    if (lambda_h < 0.0) {
        out.p_b = purchase_limit;
        served += out.p_b;
    }

    double residual = eta_h - served;
    double m = 0.0;  // balance dual; stays 0 when surplus spills
    if (residual > 0.0) {
        // Ascending marginal cost; the grid loses ties so the TGR is preferred
        // at c_p == lambda (any tie split is optimal).
        struct Offer {
            double cost, room;
            int unit;  // -1 = grid
        };
        std::vector<Offer> offers;
        for (int g = 0; g < G; ++g)
            if (tgrs[g].c_p_per_kwh >= 0.0 && hi[g] > lo[g])
                offers.push_back({tgrs[g].c_p_per_kwh, hi[g] - lo[g], g});
        if (lambda_h >= 0.0) offers.push_back({lambda_h, purchase_limit, -1});
        std::stable_sort(offers.begin(), offers.end(), [](const Offer& a, const Offer& b) {
            if (a.cost != b.cost) return a.cost < b.cost;
            return (a.unit >= 0) > (b.unit >= 0);
        });
        for (const Offer& o : offers) {
            if (residual <= 0.0) break;
            double take = std::min(residual, o.room);
            if (o.unit >= 0)
                out.p_g[o.unit] += take;
            else
                out.p_b += take;
            residual -= take;
            m = o.cost;
        }
        if (residual > 1e-9)
            throw infeasible_error("hourly demand exceeds committed capacity plus purchase limit");
        residual = 0.0;
    } else {
        out.p_s = -residual;
    }

    out.balance_price = m;
    out.cost = lambda_h * out.p_b;
    for (int g = 0; g < G; ++g) out.cost += tgrs[g].c_p_per_kwh * out.p_g[g];

    // phi from bound duals: a_g picks up (c_p - m)+ at the lower bound, b_g
    // picks up (m - c_p)+ at the upper; collapsed bounds (u=0 included) hold
    // both, which reproduces the one-sided derivative in u.
    const double eps = 1e-9;
    for (int g = 0; g < G; ++g) {
        double c = tgrs[g].c_p_per_kwh;
        double a = (out.p_g[g] <= lo[g] + eps) ? std::max(c - m, 0.0) : 0.0;
        double b = (out.p_g[g] >= hi[g] - eps) ? std::max(m - c, 0.0) : 0.0;
        out.phi[g] = a * tgrs[g].p_min_kw - b * tgrs[g].p_max_kw;
    }
    return out;
}

DispatchResult evaluate_q_relaxed(const std::vector<std::vector<double>>& u,
                                  const DailyProfile& xi, const MicrogridInstance& instance) {
    const int G = instance.num_tgrs(), H = instance.horizon;
    if (static_cast<int>(u.size()) != G)
        throw std::invalid_argument("relaxed commitment does not match unit count");
    if (static_cast<int>(xi.eta.size()) < H || static_cast<int>(xi.lambda.size()) < H)
        throw std::invalid_argument("realization shorter than the horizon");

    DispatchResult res;
    res.p_g.assign(G, std::vector<double>(H, 0.0));
    res.p_b.assign(H, 0.0);
    res.p_s.assign(H, 0.0);
    res.balance_price.assign(H, 0.0);
    res.phi.assign(G, std::vector<double>(H, 0.0));

    std::vector<double> u_h(G);
    for (int h = 0; h < H; ++h) {
        for (int g = 0; g < G; ++g) u_h[g] = u[g][h];
        HourlyDispatch hd =
            hourly_dispatch(instance.tgrs, u_h, xi.eta[h], xi.lambda[h], instance.purchase_limit_kw);
        for (int g = 0; g < G; ++g) {
            res.p_g[g][h] = hd.p_g[g];
            res.phi[g][h] = hd.phi[g];
        }
        res.p_b[h] = hd.p_b;
        res.p_s[h] = hd.p_s;
        res.balance_price[h] = hd.balance_price;
        res.cost += hd.cost;
    }
    return res;
}

DispatchResult evaluate_q(const CommitmentSchedule& schedule, const DailyProfile& xi,
                          const MicrogridInstance& instance) {
    const int G = instance.num_tgrs(), H = instance.horizon;
    std::vector<std::vector<double>> u(G, std::vector<double>(H, 0.0));
    for (int g = 0; g < G; ++g)
        for (int h = 0; h < H; ++h) u[g][h] = schedule.u[g][h];
    return evaluate_q_relaxed(u, xi, instance);
}

std::vector<std::vector<double>> dispatch_sensitivity(const CommitmentSchedule& schedule,
                                                      const DailyProfile& xi,
                                                      const MicrogridInstance& instance) {
    return evaluate_q(schedule, xi, instance).phi;
}

namespace {

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

}  // namespace

std::string dispatch_lp_text(const CommitmentSchedule& schedule, const DailyProfile& xi,
                             const MicrogridInstance& instance, const std::string& label) {
    const int G = instance.num_tgrs(), H = instance.horizon;
    std::string out;
    out += "/* dispatch LP";
    if (!label.empty()) out += " [" + label + "]";
    out += ": horizon " + std::to_string(H) + ", units " + std::to_string(G) + " */\n";
    out += "min:";
    for (int h = 0; h < H; ++h) {
        for (int g = 0; g < G; ++g)
            out += " + " + fmt(instance.tgrs[g].c_p_per_kwh) + " p_" + instance.tgrs[g].id + "_" +
                   std::to_string(h);
        out += " + " + fmt(xi.lambda[h]) + " pb_" + std::to_string(h);
    }
    out += ";\n";
    for (int h = 0; h < H; ++h) {
        out += "balance_" + std::to_string(h) + ":";
        for (int g = 0; g < G; ++g)
            out += " + p_" + instance.tgrs[g].id + "_" + std::to_string(h);
        out += " + pb_" + std::to_string(h) + " - ps_" + std::to_string(h) + " = " +
               fmt(xi.eta[h]) + ";\n";
    }
    for (int h = 0; h < H; ++h) {
        for (int g = 0; g < G; ++g) {
            double u = schedule.u[g][h] ? 1.0 : 0.0;
            out += fmt(u * instance.tgrs[g].p_min_kw) + " <= p_" + instance.tgrs[g].id + "_" +
                   std::to_string(h) + " <= " + fmt(u * instance.tgrs[g].p_max_kw) + ";\n";
        }
        if (std::isfinite(instance.purchase_limit_kw))
            out += "0 <= pb_" + std::to_string(h) + " <= " + fmt(instance.purchase_limit_kw) +
                   ";\n";
        else
            out += "0 <= pb_" + std::to_string(h) + ";\n";
        out += "0 <= ps_" + std::to_string(h) + ";\n";
    }
    return out;
}

}  // namespace drouc
