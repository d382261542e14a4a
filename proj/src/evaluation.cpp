#include "drouc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "drouc/errors.hpp"
#include "drouc/parallel.hpp"

namespace drouc {

EvaluationResult out_of_sample_cost(const CommitmentSchedule& schedule, const Dataset& test,
                                    const MicrogridInstance& instance, int threads) {
    auto bad = validate_commitment(schedule, instance);
    if (!bad.empty()) throw std::invalid_argument("out_of_sample_cost: " + bad.front());
    if (test.horizon != instance.horizon)
        throw std::invalid_argument("out_of_sample_cost: test horizon " +
                                    std::to_string(test.horizon) + " vs instance horizon " +
                                    std::to_string(instance.horizon));

    double cx = first_stage_cost(schedule, instance);
    EvaluationResult res;
    res.per_day_cost.assign(test.profiles.size(), 0.0);
    std::exception_ptr first_error;
    parallel_for(test.profiles.size(), threads, [&](std::size_t d) {
        try {
            res.per_day_cost[d] = cx + evaluate_q(schedule, test.profiles[d], instance).cost;
        } catch (...) {
            if (!first_error) first_error = std::current_exception();
        }
    });
    if (first_error) std::rethrow_exception(first_error);
    for (double c : res.per_day_cost) res.total_cost += c;
    return res;
}

namespace {

SweepRow run_one(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                 const Dataset& test, const SolverConfig& base, double rho, bool suc) {
    SweepRow row;
    row.rho = rho;
    try {
        SolverConfig cfg = base;
        cfg.ambiguity.rho = rho;
        UcSolution sol = suc ? solve_suc(instance, scenarios, cfg)
                             : solve_rkl_muc(instance, scenarios, cfg);
        row.train_objective = sol.objective;
        row.iterations = sol.trace.iterations;
        row.wall_ms = sol.trace.wall_ms;
        row.status = sol.trace.status;
        row.schedule = sol.schedule;
        row.total_cost =
            out_of_sample_cost(sol.schedule, test, instance, cfg.threads).total_cost;
    } catch (const std::exception& e) {
        row.failed = true;
        row.status = e.what();
        row.total_cost = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

}  // namespace

SweepReport rho_sweep(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                      const std::vector<double>& rhos, const Dataset& test,
                      const SolverConfig& config) {
    if (rhos.empty()) throw std::invalid_argument("rho_sweep: empty rho list");
    for (double r : rhos)
        if (!(r >= 0.0) || !std::isfinite(r))
            throw std::invalid_argument("rho_sweep: rho must be finite and nonnegative");

    std::vector<double> order = rhos;
    std::sort(order.begin(), order.end());

    SweepReport rep;
    double prev_obj = -std::numeric_limits<double>::infinity();
    for (double rho : order) {
        SweepRow row = run_one(instance, scenarios, test, config, rho, false);
        if (!row.failed) {
            // training objective must not drop as the ambiguity ball grows
            if (row.train_objective <
                prev_obj - 1e-9 * std::max(1.0, std::abs(prev_obj)))
                throw std::logic_error("rho_sweep: training objective decreased at rho=" +
                                       std::to_string(rho));
            prev_obj = std::max(prev_obj, row.train_objective);
        }
        rep.rows.push_back(std::move(row));
    }
    rep.suc = run_one(instance, scenarios, test, config, 0.0, true);
    return rep;
}

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string num6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string sweep_to_csv(const SweepReport& report) {
    std::ostringstream out;
    out << "rho,total_cost,iterations,wall_ms\n";
    for (const SweepRow& r : report.rows)
        out << num(r.rho) << ',' << num(r.total_cost) << ',' << r.iterations << ','
            << num(r.wall_ms) << '\n';
    const SweepRow& s = report.suc;
    out << "suc," << num(s.total_cost) << ',' << s.iterations << ',' << num(s.wall_ms) << '\n';
    return out.str();
}

std::string sweep_to_svg(const SweepReport& report) {
    const double W = 640, H = 400, ml = 70, mr = 20, mt = 40, mb = 50;
    std::vector<std::pair<double, double>> pts;  // (rho, cost)
    for (const SweepRow& r : report.rows)
        if (!r.failed && std::isfinite(r.total_cost)) pts.emplace_back(r.rho, r.total_cost);

    double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
    bool have_suc = !report.suc.failed && std::isfinite(report.suc.total_cost);
    if (!pts.empty()) {
        x_lo = x_hi = pts.front().first;
        y_lo = y_hi = pts.front().second;
        for (auto& [x, y] : pts) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (have_suc) {
        y_lo = pts.empty() ? report.suc.total_cost : std::min(y_lo, report.suc.total_cost);
        y_hi = pts.empty() ? report.suc.total_cost : std::max(y_hi, report.suc.total_cost);
    }
    if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
    double pad = std::max((y_hi - y_lo) * 0.08, std::max(1e-9, std::abs(y_hi) * 1e-6));
    y_lo -= pad;
    y_hi += pad;

    auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - y_lo) / (y_hi - y_lo) * (H - mt - mb); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << W << ' ' << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
      << "Out-of-sample total cost vs rho</text>\n";
    // axes
    s << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr << "\" y2=\""
      << H - mb << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << H - mb
      << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = x_lo + (x_hi - x_lo) * t / 4.0, yv = y_lo + (y_hi - y_lo) * t / 4.0;
        s << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 18
          << "\" text-anchor=\"middle\">" << num6(xv) << "</text>\n";
        s << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
          << "\" text-anchor=\"end\">" << num6(yv) << "</text>\n";
        s << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << W - mr << "\" y2=\""
          << py(yv) << "\" stroke=\"#dddddd\"/>\n";
    }
    s << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">rho</text>\n";
    if (have_suc) {
        double y = py(report.suc.total_cost);
        s << "<line x1=\"" << ml << "\" y1=\"" << y << "\" x2=\"" << W - mr << "\" y2=\"" << y
          << "\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n";
    }
    if (!pts.empty()) {
        s << "<polyline fill=\"none\" stroke=\"#2465a8\" stroke-width=\"2\" points=\"";
        for (auto& [x, y] : pts) s << num6(px(x)) << ',' << num6(py(y)) << ' ';
        s << "\"/>\n";
        for (auto& [x, y] : pts)
            s << "<circle cx=\"" << num6(px(x)) << "\" cy=\"" << num6(py(y))
              << "\" r=\"3\" fill=\"#2465a8\"/>\n";
    }
    // legend
    s << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << mt + 10 << "\" x2=\"" << W - mr - 120
      << "\" y2=\"" << mt + 10 << "\" stroke=\"#2465a8\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - mr - 114 << "\" y=\"" << mt + 14 << "\">RKL-MUC</text>\n";
    s << "<line x1=\"" << W - mr - 150 << "\" y1=\"" << mt + 28 << "\" x2=\"" << W - mr - 120
      << "\" y2=\"" << mt + 28
      << "\" stroke=\"#c0392b\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n";
    s << "<text x=\"" << W - mr - 114 << "\" y=\"" << mt + 32 << "\">SUC</text>\n";
    s << "</svg>\n";
    return s.str();
}

namespace {

void write_file(const std::string& body, const std::string& path, const char* what) {
    std::ofstream out(path);
    if (!out) throw io_error(std::string("cannot open ") + path + " for " + what);
    out << body;
    if (!out.good()) throw io_error(std::string("failed writing ") + path);
}

}  // namespace

void save_sweep_csv(const SweepReport& report, const std::string& path) {
    write_file(sweep_to_csv(report), path, "sweep csv");
}

void save_sweep_svg(const SweepReport& report, const std::string& path) {
    write_file(sweep_to_svg(report), path, "sweep svg");
}

}  // namespace drouc
