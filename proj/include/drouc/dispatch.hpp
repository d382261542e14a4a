#pragma once

#include <limits>
#include <string>
#include <vector>

#include "drouc/market_data.hpp"

namespace drouc {

struct TgrParams {
    std::string id;
    double p_min_kw = 0.0;
    double p_max_kw = 0.0;
    int min_up_h = 1;
    int min_down_h = 1;
    double c_p_per_kwh = 0.0;  // linear fuel cost
    double c_u_per_h = 0.0;    // fixed fuel cost while committed
    double c_v = 0.0;          // start-up cost
    int initial_commitment = 0;
};

struct MicrogridInstance {
    int horizon = 24;
    double purchase_limit_kw = std::numeric_limits<double>::infinity();
    std::vector<TgrParams> tgrs;
    int num_tgrs() const { return static_cast<int>(tgrs.size()); }
};

// Read an instance from a JSON config; validates physics invariants.
MicrogridInstance load_instance(const std::string& path);

struct CommitmentSchedule {
    // [g][h]; v is the start-up indicator
    std::vector<std::vector<char>> u, v;
};

CommitmentSchedule all_off_schedule(const MicrogridInstance& instance);

// Commitment + start-up cost of the first stage: sum of c_u*u + c_v*v.
double first_stage_cost(const CommitmentSchedule& schedule, const MicrogridInstance& instance);

// Empty list = feasible. Checks shapes, binariness, start-up linking and the
// min-up/min-down windows (windows truncate at the horizon).
std::vector<std::string> validate_commitment(const CommitmentSchedule& schedule,
                                             const MicrogridInstance& instance);

struct HourlyDispatch {
    std::vector<double> p_g;  // one slot per TGR; zero when uncommitted
    double p_b = 0.0;
    double p_s = 0.0;
    double cost = 0.0;           // fuel + purchase for this hour
    double balance_price = 0.0;  // dual of the balance row
    std::vector<double> phi;     // d(cost)/d(u_g), valid one-sided at u on {0,1}
};

// Closed-form merit order for one hour with the commitment relaxed to
// u_h[g] in [0,1]. Committed minimums are mandatory; the rest of the demand
// is served cheapest-first among unit flexible ranges and the grid; surplus
// spills for free. Duals come from the merit-order breakpoint.
HourlyDispatch hourly_dispatch(const std::vector<TgrParams>& tgrs,
                               const std::vector<double>& u_h, double eta_h, double lambda_h,
                               double purchase_limit);

struct DispatchResult {
    std::vector<std::vector<double>> p_g;  // G x H
    std::vector<double> p_b, p_s;          // H
    double cost = 0.0;                     // Q(x, xi)
    std::vector<double> balance_price;     // H
    std::vector<std::vector<double>> phi;  // G x H sensitivity d(Q)/d(u)
};

DispatchResult evaluate_q(const CommitmentSchedule& schedule, const DailyProfile& xi,
                          const MicrogridInstance& instance);

// Same second stage with fractional commitments; used by finite-difference
// checks and anywhere the LP value function is probed off the binary grid.
DispatchResult evaluate_q_relaxed(const std::vector<std::vector<double>>& u,
                                  const DailyProfile& xi, const MicrogridInstance& instance);

std::vector<std::vector<double>> dispatch_sensitivity(const CommitmentSchedule& schedule,
                                                      const DailyProfile& xi,
                                                      const MicrogridInstance& instance);

// Human-readable rendering of the dispatch LP for one day at a fixed
// commitment. Debug aid behind the CLI's --dump-lp; not a standardized format.
std::string dispatch_lp_text(const CommitmentSchedule& schedule, const DailyProfile& xi,
                             const MicrogridInstance& instance, const std::string& label = "");

}  // namespace drouc
