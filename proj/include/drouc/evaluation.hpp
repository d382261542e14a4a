#pragma once

#include <string>
#include <vector>

#include "drouc/clustering.hpp"
#include "drouc/dispatch.hpp"
#include "drouc/dro_solver.hpp"
#include "drouc/market_data.hpp"

namespace drouc {

// Fixed first-stage decisions priced against held-out days.
struct EvaluationResult {
    std::vector<double> per_day_cost;  // c.x + Q(x, xi_d) per test day
    double total_cost = 0.0;
    std::string method;
    double rho = 0.0;
};

EvaluationResult out_of_sample_cost(const CommitmentSchedule& schedule, const Dataset& test,
                                    const MicrogridInstance& instance, int threads = 1);

struct SweepRow {
    double rho = 0.0;
    double train_objective = 0.0;  // solver objective on the scenario set
    double total_cost = 0.0;       // out-of-sample, NaN when failed
    int iterations = 0;
    double wall_ms = 0.0;
    std::string status;  // solver status, or the error text when failed
    bool failed = false;
    CommitmentSchedule schedule;
};

struct SweepReport {
    std::vector<SweepRow> rows;  // ascending rho
    SweepRow suc;                // risk-neutral baseline
};

// One solve + out-of-sample evaluation per rho, plus the SUC baseline.
// A row's solver failure is recorded in the row and the sweep continues.
SweepReport rho_sweep(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                      const std::vector<double>& rhos, const Dataset& test,
                      const SolverConfig& config);

// CSV: header rho,total_cost,iterations,wall_ms; one row per rho then the
// baseline row with literal "suc" in the rho column.
std::string sweep_to_csv(const SweepReport& report);
// Line chart of total cost vs rho with the flat SUC reference.
std::string sweep_to_svg(const SweepReport& report);

void save_sweep_csv(const SweepReport& report, const std::string& path);
void save_sweep_svg(const SweepReport& report, const std::string& path);

}  // namespace drouc
