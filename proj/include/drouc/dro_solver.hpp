#pragma once

#include <string>
#include <utility>
#include <vector>

#include "drouc/clustering.hpp"
#include "drouc/dispatch.hpp"

namespace drouc {

// KL-ball ambiguity around the scenario frequencies. k_max caps the scaled
// exponent (q - mu)/zeta inside the master so the exponentials stay
// representable; zeta_floor keeps the dual variable off zero.
struct AmbiguityParams {
    double rho = 0.0;
    double k_max = 50.0;
    double zeta_floor = 1e-9;
};

// KL(p || q) over a shared finite support. Throws on size mismatch, invalid
// distributions, or p putting mass where q has none.
double kl_divergence(const std::vector<double>& p, const std::vector<double>& q);

// Scaled exceedance and its exponential transform:
//   kbar = (q - mu)/zeta,  rbar = zeta * e^(kbar - 1).
// zeta below the floor is a caller bug.
double kbar(double q_value, double mu, double zeta, double zeta_floor = 1e-9);
double rbar(double q_value, double mu, double zeta, double zeta_floor = 1e-9);

// Probability-weighted sum of rbar over scenarios; jointly convex in
// (q-values, mu, zeta), which is what makes the cuts below global
// under-estimators.
double r_total(const std::vector<double>& q_values, const std::vector<double>& pi_o, double mu,
               double zeta, double zeta_floor = 1e-9);

// Second-stage value and commitment sensitivity for one scenario.
struct ScenarioEvaluation {
    double q = 0.0;
    std::vector<std::vector<double>> dq_du;  // G x H
};

struct CutAnchor {
    CommitmentSchedule schedule;
    double mu = 0.0;
    double zeta = 0.0;
};

// Supporting hyperplane of r_total at the anchor:
//   r_total(x, mu, zeta) >= anchor_value + alpha.(u - u_j)
//                           + beta (mu - mu_j) + gamma (zeta - zeta_j).
// Start-up variables never enter the second stage, so their block is
// identically zero and left implicit.
struct Cut {
    std::vector<std::vector<double>> alpha;  // G x H, on u
    double beta = 0.0;                       // on mu
    double gamma = 0.0;                      // on zeta
    CutAnchor anchor;
    double anchor_value = 0.0;
};

Cut build_cut(const CutAnchor& anchor, const std::vector<ScenarioEvaluation>& evals,
              const std::vector<double>& pi_o, const AmbiguityParams& params);

// The cut's affine right-hand side at an arbitrary point.
double evaluate_cut(const Cut& cut, const std::vector<std::vector<double>>& u, double mu,
                    double zeta);

struct MasterSolution {
    CommitmentSchedule schedule;
    double mu = 0.0;
    double zeta = 0.0;
    double theta = 0.0;
    double objective = 0.0;  // c.x + mu + rho*zeta + theta
};

// One Benders master solve: commitment constraints, the exponent guard
// q_max - mu <= k_max * zeta, bounding boxes on mu/zeta, theta >= 0 and
// theta >= every cut.
MasterSolution solve_master(const std::vector<Cut>& cuts, const MicrogridInstance& instance,
                            double q_max, const AmbiguityParams& params);

struct WorstCaseDistribution {
    std::vector<double> probabilities;
    double attained_expectation = 0.0;
    double kl_to_nominal = 0.0;
};

// Exact inner maximization max { E_pi[q] : KL(pi || pi_o) <= rho } by
// exponential tilting with a bisection on the tilt.
std::pair<double, WorstCaseDistribution> worst_case_expectation(const std::vector<double>& q_values,
                                                                const std::vector<double>& pi_o,
                                                                double rho);

struct IterationRecord {
    int iteration = 0;
    int phase = 1;  // 1 = exponential-master Benders, 2 = exact refinement
    double lb = 0.0;
    double ub = 0.0;  // best seen so far
    double candidate_mu = 0.0;
    double candidate_zeta = 0.0;
    double cut_norm = 0.0;
    double wall_ms = 0.0;
};

struct SolveTrace {
    std::vector<IterationRecord> records;
    std::string status;  // "converged" or "iteration_limit"
    double q_max = 0.0;
    int iterations = 0;
    double wall_ms = 0.0;
    bool phase1_box_active = false;  // mu/zeta box bound binding when phase 1 stopped
    double max_kbar_seen = -1e300;   // largest scaled exponent over all candidates
};

struct SolverConfig {
    double tol = 1e-5;  // absolute gap target for the Benders phase
    int max_iter = 400;
    int threads = 1;
    AmbiguityParams ambiguity;
};

struct UcSolution {
    CommitmentSchedule schedule;
    double objective = 0.0;
    double lb = 0.0;
    double ub = 0.0;
    double rho = 0.0;
    WorstCaseDistribution worst_case;
    SolveTrace trace;
    std::vector<Cut> cuts;  // every Benders cut emitted, for certification
};

// Robust unit commitment over the KL ball: Benders on the exponential dual
// reformulation, then an exact L-shaped pass on the tilting oracle that
// certifies (and if needed repairs) the incumbent. rho below 1e-12 delegates
// to solve_suc.
UcSolution solve_rkl_muc(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                         const SolverConfig& config);

// Risk-neutral benchmark: min c.x + E_{pi_o}[Q(x, xi)] by the L-shaped method
// with one aggregated expectation cut per iteration.
UcSolution solve_suc(const MicrogridInstance& instance, const ScenarioSet& scenarios,
                     const SolverConfig& config);

// Evaluate Q and dQ/du for every scenario at a fixed schedule.
std::vector<ScenarioEvaluation> evaluate_scenarios(const MicrogridInstance& instance,
                                                   const ScenarioSet& scenarios,
                                                   const CommitmentSchedule& schedule,
                                                   int threads = 1);

// {rho, objective, lb, ub, iterations, schedule, worst_case_distribution,
// timing} as a JSON document.
std::string solution_to_json(const UcSolution& solution);
void save_solution(const UcSolution& solution, const std::string& path);

}  // namespace drouc
