#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace drouc::opt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LE, EQ, GE };

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit };

std::string to_string(SolveStatus s);

// Centralized numeric tolerances so the test suite can pin them in one place.
struct Tolerances {
    double feasibility = 1e-8;  // primal residual / bound violation
    double optimality = 1e-7;   // reduced-cost threshold and duality-gap check
    double pivot = 1e-9;        // entries below this are treated as zero in ratio tests
};

// Dense LP: min c.x  s.t.  rows_i . x  (<=|=|>=)  rhs_i,  lower <= x <= upper.
// Bounds may be +-inf. Rows are stored dense; this kernel targets the desk
// scale of the master/subproblem family (a few hundred rows), not sparsity.
struct LinearProgram {
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<Sense> senses;
    std::vector<double> rhs;
    std::vector<double> lower;
    std::vector<double> upper;

    explicit LinearProgram(int num_vars = 0)
        : objective(num_vars, 0.0), lower(num_vars, 0.0), upper(num_vars, kInf) {}

    int num_vars() const { return static_cast<int>(objective.size()); }
    int num_rows() const { return static_cast<int>(rows.size()); }

    void add_row(std::vector<double> coeffs, Sense sense, double b);

    // Human-readable dump for debugging (exposed through the CLI's --dump-lp).
    void dump(std::ostream& os) const;
};

struct MixedIntegerProgram {
    LinearProgram lp;
    std::vector<char> integral;  // per variable; nonzero = integer-constrained

    explicit MixedIntegerProgram(int num_vars = 0)
        : lp(num_vars), integral(num_vars, 0) {}
};

// Optimal basis snapshot. columns[i] is the basic column of row i (structural
// j < num_vars, slack num_vars + i); at_upper marks nonbasic variables resting
// at their upper bound. Feeding it back into solve_lp warm-starts an LP that
// shares the snapshot's rows and differs only in bounds or objective.
struct Basis {
    std::vector<int> columns;
    std::vector<char> at_upper;
    bool empty() const { return columns.empty(); }
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    std::vector<double> duals;          // one per row; sign follows min-problem convention
    std::vector<double> reduced_costs;  // one per variable
    Basis basis;                        // filled when status == Optimal
    long iterations = 0;                // simplex pivots (LP) / total pivots (MILP)
    long nodes = 0;                     // branch-and-bound nodes created beyond the root
};

SolveOutcome solve_lp(const LinearProgram& lp, const Tolerances& tol = {});

// Warm variant: start from a basis captured on a related solve. Falls back to
// the cold algorithm whenever the snapshot does not fit or turns singular, so
// it accepts any Basis and never changes what is optimal.
SolveOutcome solve_lp(const LinearProgram& lp, const Tolerances& tol, const Basis& warm);

struct MilpConfig {
    double gap_tol = 1e-9;      // absolute; prune nodes within this of the incumbent
    double int_tol = 1e-6;      // integrality residual accepted as integral
    long node_limit = 2000000;
    Tolerances tol{};
};

// Best-first branch and bound over LP relaxations. Branching is deterministic:
// among the integer variables with maximal fractionality, the lowest index.
SolveOutcome solve_milp(const MixedIntegerProgram& mip, const MilpConfig& cfg = {});

}  // namespace drouc::opt
