#include "drouc/opt_kernel.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <queue>
#include <stdexcept>

namespace drouc::opt {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

void LinearProgram::add_row(std::vector<double> coeffs, Sense sense, double b) {
    if (static_cast<int>(coeffs.size()) != num_vars())
        throw std::invalid_argument("row length does not match variable count");
    rows.push_back(std::move(coeffs));
    senses.push_back(sense);
    rhs.push_back(b);
}

void LinearProgram::dump(std::ostream& os) const {
    os << "min";
    for (int j = 0; j < num_vars(); ++j)
        if (objective[j] != 0.0) os << " + " << objective[j] << " x" << j;
    os << "\nsubject to\n";
    for (int i = 0; i < num_rows(); ++i) {
        os << "  r" << i << ":";
        for (int j = 0; j < num_vars(); ++j)
            if (rows[i][j] != 0.0) os << " + " << rows[i][j] << " x" << j;
        os << (senses[i] == Sense::LE ? " <= " : senses[i] == Sense::GE ? " >= " : " = ");
        os << rhs[i] << "\n";
    }
    os << "bounds\n";
    for (int j = 0; j < num_vars(); ++j)
        os << "  " << lower[j] << " <= x" << j << " <= " << upper[j] << "\n";
}

namespace {

void check_finite(const LinearProgram& lp) {
    for (double c : lp.objective)
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite objective coefficient");
    for (const auto& row : lp.rows) {
        if (static_cast<int>(row.size()) != lp.num_vars())
            throw std::invalid_argument("row length does not match variable count");
        for (double a : row)
            if (!std::isfinite(a)) throw std::invalid_argument("non-finite row coefficient");
    }
    for (double b : lp.rhs)
        if (!std::isfinite(b)) throw std::invalid_argument("non-finite right-hand side");
    for (int j = 0; j < lp.num_vars(); ++j) {
        if (std::isnan(lp.lower[j]) || std::isnan(lp.upper[j]))
            throw std::invalid_argument("NaN variable bound");
        if (lp.lower[j] > lp.upper[j])
            throw std::invalid_argument("crossed variable bounds");
    }
    if (lp.senses.size() != lp.rows.size() || lp.rhs.size() != lp.rows.size() ||
        lp.lower.size() != lp.objective.size() || lp.upper.size() != lp.objective.size())
        throw std::invalid_argument("inconsistent LP dimensions");
}

// Bounded-variable two-phase revised simplex with an explicit basis inverse.
// Columns are laid out [structural | slacks | artificials]. Bland's rule on
// both the entering and the leaving choice guards against cycling.
class Simplex {
  public:
    Simplex(const LinearProgram& lp, const Tolerances& tol) : tol_(tol) {
        n_ = lp.num_vars();
        m_ = lp.num_rows();
        ntot_ = n_ + 2 * m_;
        col_.assign(ntot_, std::vector<double>(m_, 0.0));
        lb_.assign(ntot_, 0.0);
        ub_.assign(ntot_, kInf);
        // equilibrate: exponential-surface cuts mix unit rows with rows whose
        // coefficients reach e^kmax, and a basis drawn from both scales is
        // numerically singular no matter how pivots are chosen
        row_scale_.assign(m_, 1.0);
        for (int i = 0; i < m_; ++i) {
            double mx = 0.0;
            for (int j = 0; j < n_; ++j) mx = std::max(mx, std::abs(lp.rows[i][j]));
            if (mx > 0.0 && std::isfinite(mx)) row_scale_[i] = 1.0 / mx;
        }
        b_.resize(m_);
        for (int i = 0; i < m_; ++i) b_[i] = lp.rhs[i] * row_scale_[i];
        for (int j = 0; j < n_; ++j) {
            for (int i = 0; i < m_; ++i) col_[j][i] = lp.rows[i][j] * row_scale_[i];
            lb_[j] = lp.lower[j];
            ub_[j] = lp.upper[j];
        }
        for (int i = 0; i < m_; ++i) {
            int s = n_ + i;
            col_[s][i] = 1.0;
            switch (lp.senses[i]) {
                case Sense::LE: lb_[s] = 0.0; ub_[s] = kInf; break;
                case Sense::EQ: lb_[s] = 0.0; ub_[s] = 0.0; break;
                case Sense::GE: lb_[s] = -kInf; ub_[s] = 0.0; break;
            }
        }
        bscale_ = 1.0;
        for (double b : b_) bscale_ = std::max(bscale_, std::abs(b));
        pivot_skip_ = tol.pivot;
    }

    SolveOutcome run(const LinearProgram& lp, const Basis* warm = nullptr) {
        if (warm != nullptr && !warm->empty()) {
            try {
                if (prepare_warm(*warm)) return attempt_warm(lp);
            } catch (const std::runtime_error&) {
                // stale or degenerate snapshot; fall through to the cold path
            }
        }
        try {
            return attempt(lp);
        } catch (const std::runtime_error&) {
            // the pivot sequence walked into a numerically singular basis;
            // redo the whole solve refusing small ratio-test pivots
            pivot_skip_ = std::max(100.0 * tol_.pivot, 1e-7);
            refactor_every_ = 8;
            return attempt(lp);
        }
    }

  private:
    SolveOutcome attempt(const LinearProgram& lp) {
        SolveOutcome out;
        init_phase1();
        std::vector<double> phase1_cost(ntot_, 0.0);
        for (int a = n_ + m_; a < ntot_; ++a) phase1_cost[a] = 1.0;
        Loop r1 = iterate(phase1_cost);
        if (r1 == Loop::IterationLimit) {
            out.status = SolveStatus::IterationLimit;
            out.iterations = pivots_;
            return out;
        }
        if (r1 == Loop::Unbounded)
            throw std::runtime_error("phase-1 simplex reported unbounded (numerical failure)");
        double infeas = 0.0;
        for (int a = n_ + m_; a < ntot_; ++a) infeas += std::abs(xval_[a]);
        if (infeas > tol_.feasibility * (1.0 + bscale_)) {
            out.status = SolveStatus::Infeasible;
            out.iterations = pivots_;
            return out;
        }
        retire_artificials();

        std::vector<double> cost(ntot_, 0.0);
        for (int j = 0; j < n_; ++j) cost[j] = lp.objective[j];
        Loop r2 = iterate(cost);
        out.iterations = pivots_;
        if (r2 == Loop::IterationLimit) {
            out.status = SolveStatus::IterationLimit;
            return out;
        }
        if (r2 == Loop::Unbounded) {
            out.status = SolveStatus::Unbounded;
            return out;
        }
        return finish(cost);
    }

    SolveOutcome finish(const std::vector<double>& cost) {
        SolveOutcome out;
        refactor();
        recompute_basics();
        out.iterations = pivots_;
        out.status = SolveStatus::Optimal;
        out.x.assign(xval_.begin(), xval_.begin() + n_);
        out.objective = 0.0;
        for (int j = 0; j < n_; ++j) out.objective += cost[j] * xval_[j];
        std::vector<double> y = dual_prices(cost);
        out.reduced_costs.resize(n_);
        for (int j = 0; j < n_; ++j) {
            double d = cost[j];
            for (int i = 0; i < m_; ++i) d -= y[i] * col_[j][i];
            out.reduced_costs[j] = d;
        }
        // duals are priced against the scaled rows; undo the equilibration
        out.duals = y;
        for (int i = 0; i < m_; ++i) out.duals[i] *= row_scale_[i];
        // snapshot the basis for warm restarts; a pinned artificial (kept only
        // when its row is redundant) maps to that row's slack, which carries
        // the same column up to sign
        out.basis.columns.resize(m_);
        for (int i = 0; i < m_; ++i) {
            int c = basis_[i];
            out.basis.columns[i] = (c >= n_ + m_) ? c - m_ : c;
        }
        out.basis.at_upper.assign(n_ + m_, 0);
        for (int j = 0; j < n_ + m_; ++j)
            out.basis.at_upper[j] = (state_[j] == State::AtUpper) ? 1 : 0;
        return out;
    }

    // Rebuild simplex state from a snapshot taken on a related LP. False means
    // the snapshot does not fit this problem; a singular basis also lands
    // there so the caller can fall back to a cold start.
    bool prepare_warm(const Basis& warm) {
        if (static_cast<int>(warm.columns.size()) != m_) return false;
        if (static_cast<int>(warm.at_upper.size()) != n_ + m_) return false;
        std::vector<char> used(n_ + m_, 0);
        for (int c : warm.columns) {
            if (c < 0 || c >= n_ + m_ || used[c]) return false;
            used[c] = 1;
        }
        basis_ = warm.columns;
        xval_.assign(ntot_, 0.0);
        state_.assign(ntot_, State::AtLower);
        for (int a = n_ + m_; a < ntot_; ++a) {
            lb_[a] = 0.0;
            ub_[a] = 0.0;
        }
        for (int j = 0; j < n_ + m_; ++j) {
            if (used[j]) {
                state_[j] = State::Basic;
                continue;
            }
            if (warm.at_upper[j] && ub_[j] < kInf) {
                state_[j] = State::AtUpper;
                xval_[j] = ub_[j];
            } else if (lb_[j] > -kInf) {
                state_[j] = State::AtLower;
                xval_[j] = lb_[j];
            } else if (ub_[j] < kInf) {
                state_[j] = State::AtUpper;
                xval_[j] = ub_[j];
            } else {
                state_[j] = State::FreeZero;
                xval_[j] = 0.0;
            }
        }
        binv_.assign(m_, std::vector<double>(m_, 0.0));
        try {
            refactor();
        } catch (const std::runtime_error&) {
            return false;
        }
        recompute_basics();
        pivots_ = 0;
        return true;
    }

    // Bounds may have moved since the snapshot (branch-and-bound children
    // tighten exactly one), leaving some basics outside their box. Repair them
    // one at a time: relax the violated side of every out-of-bounds basic,
    // push the worst offender to its constrained extreme, and restore the
    // bounds. The push either lands inside the box (and the re-imposed bound
    // holds from then on, so the violated set shrinks) or proves the LP
    // infeasible, since the relaxed region contains the original.
    SolveOutcome attempt_warm(const LinearProgram& lp) {
        SolveOutcome out;
        const double slack_tol = tol_.feasibility * (1.0 + bscale_);
        for (int round = 0;; ++round) {
            if (round > m_ + 1) throw std::runtime_error("warm repair did not settle");
            int worst = -1;
            double worst_gap = slack_tol;
            bool worst_above = false;
            std::vector<std::pair<int, std::pair<double, double>>> relaxed;
            for (int i = 0; i < m_; ++i) {
                int k = basis_[i];
                double over = xval_[k] - ub_[k];
                double under = lb_[k] - xval_[k];
                if (std::max(over, under) <= slack_tol) continue;
                relaxed.push_back({k, {lb_[k], ub_[k]}});
                if (over > under)
                    ub_[k] = kInf;
                else
                    lb_[k] = -kInf;
                if (std::max(over, under) > worst_gap) {
                    worst_gap = std::max(over, under);
                    worst = k;
                    worst_above = over > under;
                }
            }
            if (worst < 0) break;
            std::vector<double> cost(ntot_, 0.0);
            cost[worst] = worst_above ? 1.0 : -1.0;
            Loop r = iterate(cost);
            for (auto& [k, b] : relaxed) {
                lb_[k] = b.first;
                ub_[k] = b.second;
            }
            if (r == Loop::IterationLimit) {
                out.status = SolveStatus::IterationLimit;
                out.iterations = pivots_;
                return out;
            }
            if (r == Loop::Unbounded) throw std::runtime_error("unbounded warm repair");
            double resid = worst_above ? xval_[worst] - ub_[worst] : lb_[worst] - xval_[worst];
            if (resid > slack_tol) {
                out.status = SolveStatus::Infeasible;
                out.iterations = pivots_;
                return out;
            }
        }
        std::vector<double> cost(ntot_, 0.0);
        for (int j = 0; j < n_; ++j) cost[j] = lp.objective[j];
        Loop r2 = iterate(cost);
        if (r2 == Loop::IterationLimit) {
            out.status = SolveStatus::IterationLimit;
            out.iterations = pivots_;
            return out;
        }
        if (r2 == Loop::Unbounded) {
            out.status = SolveStatus::Unbounded;
            out.iterations = pivots_;
            return out;
        }
        return finish(cost);
    }

    enum class State : char { Basic, AtLower, AtUpper, FreeZero };
    enum class Loop { Optimal, Unbounded, IterationLimit };

    void init_phase1() {
        xval_.assign(ntot_, 0.0);
        state_.assign(ntot_, State::FreeZero);
        for (int j = 0; j < n_ + m_; ++j) {
            if (lb_[j] > -kInf) {
                state_[j] = State::AtLower;
                xval_[j] = lb_[j];
            } else if (ub_[j] < kInf) {
                state_[j] = State::AtUpper;
                xval_[j] = ub_[j];
            } else {
                state_[j] = State::FreeZero;
                xval_[j] = 0.0;
            }
        }
        basis_.resize(m_);
        binv_.assign(m_, std::vector<double>(m_, 0.0));
        for (int i = 0; i < m_; ++i) {
            double r = b_[i];
            for (int j = 0; j < n_ + m_; ++j) r -= col_[j][i] * xval_[j];
            int a = n_ + m_ + i;
            double sgn = (r >= 0.0) ? 1.0 : -1.0;
            col_[a][i] = sgn;
            lb_[a] = 0.0;
            ub_[a] = kInf;
            xval_[a] = std::abs(r);
            state_[a] = State::Basic;
            basis_[i] = a;
            binv_[i][i] = sgn;
        }
        pivots_ = 0;
    }

    // After a feasible phase 1, pivot basic artificials out where possible and
    // freeze every artificial at zero so phase 2 cannot reuse them.
    void retire_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_ + m_) continue;
            std::vector<double> w(m_);
            int replacement = -1;
            for (int j = 0; j < n_ + m_ && replacement < 0; ++j) {
                if (state_[j] == State::Basic) continue;
                double wi = 0.0;
                for (int k = 0; k < m_; ++k) wi += binv_[i][k] * col_[j][k];
                if (std::abs(wi) > 1e-7) {
                    for (int r = 0; r < m_; ++r) {
                        w[r] = 0.0;
                        for (int k = 0; k < m_; ++k) w[r] += binv_[r][k] * col_[j][k];
                    }
                    replacement = j;
                }
            }
            if (replacement < 0) continue;  // redundant row; artificial stays pinned at 0
            int art = basis_[i];
            basis_[i] = replacement;
            state_[replacement] = State::Basic;
            state_[art] = State::AtLower;
            xval_[art] = 0.0;
            pivot_update(i, w);
        }
        for (int a = n_ + m_; a < ntot_; ++a) {
            lb_[a] = 0.0;
            ub_[a] = 0.0;
            if (state_[a] != State::Basic) {
                state_[a] = State::AtLower;
                xval_[a] = 0.0;
            }
        }
    }

    Loop iterate(const std::vector<double>& cost) {
        const long limit = 2000 + 40L * static_cast<long>(m_ + 1) * (ntot_ + 1);
        long local = 0;
        while (true) {
            if (++local > limit) return Loop::IterationLimit;
            std::vector<double> y = dual_prices(cost);
            int enter = -1, dir = 0;
            for (int j = 0; j < ntot_ && enter < 0; ++j) {
                if (state_[j] == State::Basic) continue;
                if (ub_[j] - lb_[j] <= 0.0) continue;  // fixed variable
                double d = cost[j];
                for (int i = 0; i < m_; ++i) d -= y[i] * col_[j][i];
                switch (state_[j]) {
                    case State::AtLower:
                        if (d < -tol_.optimality) { enter = j; dir = +1; }
                        break;
                    case State::AtUpper:
                        if (d > tol_.optimality) { enter = j; dir = -1; }
                        break;
                    case State::FreeZero:
                        if (d < -tol_.optimality) { enter = j; dir = +1; }
                        else if (d > tol_.optimality) { enter = j; dir = -1; }
                        break;
                    case State::Basic: break;
                }
            }
            if (enter < 0) return Loop::Optimal;

            std::vector<double> w(m_, 0.0);
            for (int i = 0; i < m_; ++i) {
                double s = 0.0;
                for (int k = 0; k < m_; ++k) s += binv_[i][k] * col_[enter][k];
                w[i] = s;
            }

            double t_best = kInf;
            if (state_[enter] != State::FreeZero && lb_[enter] > -kInf && ub_[enter] < kInf)
                t_best = ub_[enter] - lb_[enter];
            int leave = -1;
            bool leave_to_lower = true;
            const double tie = 1e-10;
            for (int i = 0; i < m_; ++i) {
                int k = basis_[i];
                double coef = dir * w[i];
                double t;
                bool to_lower;
                if (coef > pivot_skip_) {
                    if (lb_[k] <= -kInf) continue;
                    t = (xval_[k] - lb_[k]) / coef;
                    to_lower = true;
                } else if (coef < -pivot_skip_) {
                    if (ub_[k] >= kInf) continue;
                    t = (ub_[k] - xval_[k]) / (-coef);
                    to_lower = false;
                } else {
                    continue;
                }
                if (t < 0.0) t = 0.0;
                if (t < t_best - tie) {
                    t_best = t;
                    leave = i;
                    leave_to_lower = to_lower;
                } else if (t <= t_best + tie && leave >= 0 && basis_[i] < basis_[leave]) {
                    leave = i;
                    leave_to_lower = to_lower;
                }
            }
            if (t_best >= kInf) return Loop::Unbounded;

            for (int i = 0; i < m_; ++i) xval_[basis_[i]] -= t_best * dir * w[i];
            if (leave < 0) {
                // Entering variable runs to its opposite bound; basis unchanged.
                state_[enter] = (state_[enter] == State::AtLower) ? State::AtUpper : State::AtLower;
                xval_[enter] = (state_[enter] == State::AtLower) ? lb_[enter] : ub_[enter];
            } else {
                xval_[enter] += dir * t_best;
                int out = basis_[leave];
                state_[out] = leave_to_lower ? State::AtLower : State::AtUpper;
                xval_[out] = leave_to_lower ? lb_[out] : ub_[out];
                basis_[leave] = enter;
                state_[enter] = State::Basic;
                pivot_update(leave, w);
                if (++pivots_ % refactor_every_ == 0) {
                    refactor();
                    recompute_basics();
                }
            }
        }
    }

    std::vector<double> dual_prices(const std::vector<double>& cost) const {
        std::vector<double> y(m_, 0.0);
        for (int k = 0; k < m_; ++k) {
            double ck = cost[basis_[k]];
            if (ck == 0.0) continue;
            for (int i = 0; i < m_; ++i) y[i] += ck * binv_[k][i];
        }
        return y;
    }

    void pivot_update(int r, const std::vector<double>& w) {
        double piv = w[r];
        if (std::abs(piv) < 1e-12)
            throw std::runtime_error("simplex pivot element vanished (numerical failure)");
        double inv = 1.0 / piv;
        for (int k = 0; k < m_; ++k) binv_[r][k] *= inv;
        for (int i = 0; i < m_; ++i) {
            if (i == r) continue;
            double f = w[i];
            if (f == 0.0) continue;
            for (int k = 0; k < m_; ++k) binv_[i][k] -= f * binv_[r][k];
        }
    }

    // Rebuild the basis inverse from scratch by Gauss-Jordan with partial
    // pivoting; cheap insurance against drift from repeated rank-1 updates.
    void refactor() {
        std::vector<std::vector<double>> a(m_, std::vector<double>(2 * m_, 0.0));
        for (int i = 0; i < m_; ++i) {
            for (int r = 0; r < m_; ++r) a[r][i] = col_[basis_[i]][r];
            a[i][m_ + i] = 1.0;
        }
        for (int c = 0; c < m_; ++c) {
            int p = c;
            for (int r = c + 1; r < m_; ++r)
                if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
            if (std::abs(a[p][c]) < 1e-13)
                throw std::runtime_error("singular basis during refactorization");
            std::swap(a[c], a[p]);
            double inv = 1.0 / a[c][c];
            for (int k = c; k < 2 * m_; ++k) a[c][k] *= inv;
            for (int r = 0; r < m_; ++r) {
                if (r == c) continue;
                double f = a[r][c];
                if (f == 0.0) continue;
                for (int k = c; k < 2 * m_; ++k) a[r][k] -= f * a[c][k];
            }
        }
        for (int i = 0; i < m_; ++i)
            for (int k = 0; k < m_; ++k) binv_[i][k] = a[i][m_ + k];
    }

    void recompute_basics() {
        std::vector<double> r = b_;
        for (int j = 0; j < ntot_; ++j) {
            if (state_[j] == State::Basic || xval_[j] == 0.0) continue;
            for (int i = 0; i < m_; ++i) r[i] -= col_[j][i] * xval_[j];
        }
        for (int i = 0; i < m_; ++i) {
            double v = 0.0;
            for (int k = 0; k < m_; ++k) v += binv_[i][k] * r[k];
            xval_[basis_[i]] = v;
        }
    }

    Tolerances tol_;
    int n_ = 0, m_ = 0, ntot_ = 0;
    double bscale_ = 1.0;
    double pivot_skip_ = 1e-12;
    long refactor_every_ = 64;
    std::vector<std::vector<double>> col_;
    std::vector<double> lb_, ub_, b_, xval_, row_scale_;
    std::vector<State> state_;
    std::vector<int> basis_;
    std::vector<std::vector<double>> binv_;
    long pivots_ = 0;
};

}  // namespace

SolveOutcome solve_lp(const LinearProgram& lp, const Tolerances& tol) {
    check_finite(lp);
    if (lp.num_rows() == 0) {
        // Pure bound problem: each variable sits at whichever bound its cost prefers.
        SolveOutcome out;
        out.x.resize(lp.num_vars());
        out.objective = 0.0;
        out.reduced_costs = lp.objective;
        for (int j = 0; j < lp.num_vars(); ++j) {
            double c = lp.objective[j];
            if (c > 0.0) {
                if (lp.lower[j] <= -kInf) { out.status = SolveStatus::Unbounded; return out; }
                out.x[j] = lp.lower[j];
            } else if (c < 0.0) {
                if (lp.upper[j] >= kInf) { out.status = SolveStatus::Unbounded; return out; }
                out.x[j] = lp.upper[j];
            } else {
                out.x[j] = (lp.lower[j] > -kInf) ? lp.lower[j] : std::min(lp.upper[j], 0.0);
                if (!std::isfinite(out.x[j])) out.x[j] = 0.0;
            }
            out.objective += c * out.x[j];
        }
        out.status = SolveStatus::Optimal;
        return out;
    }
    Simplex s(lp, tol);
    return s.run(lp);
}

namespace {

struct Node {
    double bound;
    long id;
    int depth;
    // Bound overrides along the path from the root, one entry per branch.
    std::vector<std::pair<int, std::pair<double, double>>> tighten;
    // Parent's optimal basis; the child LP differs by one bound, so restarting
    // from it repairs a single basic variable instead of re-solving cold.
    Basis warm;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        return a.id > b.id;
    }
};

}  // namespace

SolveOutcome solve_milp(const MixedIntegerProgram& mip, const MilpConfig& cfg) {
    const LinearProgram& base = mip.lp;
    if (static_cast<int>(mip.integral.size()) != base.num_vars())
        throw std::invalid_argument("integrality mask length mismatch");
    bool any_int = false;
    for (int j = 0; j < base.num_vars(); ++j) {
        if (!mip.integral[j]) continue;
        any_int = true;
        if (base.lower[j] <= -kInf || base.upper[j] >= kInf)
            throw std::invalid_argument("integer variables must have finite bounds");
    }
    if (!any_int) return solve_lp(base, cfg.tol);

    auto apply = [&](const Node& node) {
        LinearProgram lp = base;
        for (const auto& [var, bounds] : node.tighten) {
            lp.lower[var] = std::max(lp.lower[var], bounds.first);
            lp.upper[var] = std::min(lp.upper[var], bounds.second);
        }
        return lp;
    };

    // Re-solves with integers pinned so the incumbent's continuous block and
    // duals come from an exact LP rather than a rounded relaxation point.
    auto polish = [&](const Node& node, const std::vector<double>& relaxed) {
        LinearProgram lp = apply(node);
        for (int j = 0; j < lp.num_vars(); ++j) {
            if (!mip.integral[j]) continue;
            double v = std::round(std::min(std::max(relaxed[j], lp.lower[j]), lp.upper[j]));
            lp.lower[j] = v;
            lp.upper[j] = v;
        }
        return solve_lp(lp, cfg.tol);
    };

    SolveOutcome best;
    best.status = SolveStatus::Infeasible;
    bool have_incumbent = false;
    long nodes = 0, iters = 0, next_id = 1;

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    open.push(Node{-kInf, 0, 0, {}});
    bool root = true;

    while (!open.empty()) {
        if (nodes > cfg.node_limit) {
            best.status = SolveStatus::IterationLimit;
            best.nodes = nodes;
            best.iterations = iters;
            return best;
        }
        Node node = open.top();
        open.pop();
        if (have_incumbent && node.bound >= best.objective - cfg.gap_tol) break;

        LinearProgram node_lp = apply(node);
        SolveOutcome rel = solve_lp(node_lp, cfg.tol, node.warm);
        iters += rel.iterations;
        if (rel.status == SolveStatus::Unbounded) {
            if (root) {
                rel.nodes = nodes;
                rel.iterations = iters;
                return rel;
            }
            throw std::runtime_error("unbounded node below a bounded root relaxation");
        }
        root = false;
        if (rel.status != SolveStatus::Optimal) continue;
        if (have_incumbent && rel.objective >= best.objective - cfg.gap_tol) continue;

        // the relaxation can sit a whisker outside a bound; judge fractionality
        // from the clamped value so we never branch on tolerance noise
        auto clamped = [&](int j) {
            return std::min(std::max(rel.x[j], node_lp.lower[j]), node_lp.upper[j]);
        };
        int branch = -1;
        double worst_frac = cfg.int_tol;
        for (int j = 0; j < base.num_vars(); ++j) {
            if (!mip.integral[j]) continue;
            double xb = clamped(j);
            double frac = std::abs(xb - std::round(xb));
            if (frac > worst_frac) {
                worst_frac = frac;
                branch = j;
            }
        }
        if (branch < 0) {
            SolveOutcome fixed = polish(node, rel.x);
            iters += fixed.iterations;
            if (fixed.status == SolveStatus::Optimal &&
                (!have_incumbent || fixed.objective < best.objective)) {
                best = fixed;
                have_incumbent = true;
            }
            continue;
        }

        double floor_v = std::floor(clamped(branch));
        if (floor_v >= node_lp.lower[branch] - 1e-12) {
            Node down = node;
            down.bound = rel.objective;
            down.id = next_id++;
            down.depth = node.depth + 1;
            down.tighten.push_back({branch, {-kInf, floor_v}});
            down.warm = rel.basis;
            open.push(std::move(down));
            ++nodes;
        }
        if (floor_v + 1.0 <= node_lp.upper[branch] + 1e-12) {
            Node up = node;
            up.bound = rel.objective;
            up.id = next_id++;
            up.depth = node.depth + 1;
            up.tighten.push_back({branch, {floor_v + 1.0, kInf}});
            up.warm = rel.basis;
            open.push(std::move(up));
            ++nodes;
        }
    }

    best.nodes = nodes;
    best.iterations = iters;
    if (!have_incumbent) best.status = SolveStatus::Infeasible;
    if (std::getenv("DROUC_MILP_STATS"))
        std::fprintf(stderr, "milp: %ld nodes, %ld simplex iters, status %s\n", nodes, iters,
                     to_string(best.status).c_str());
    return best;
}

}  // namespace drouc::opt
