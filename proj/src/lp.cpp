#include "geocover/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "geocover/errors.hpp"

namespace geocover::lp {

LinearProgram::LinearProgram(std::size_t num_vars)
    : n_(num_vars), c_(num_vars, 0.0), lo_(num_vars, 0.0), hi_(num_vars, kInf) {
    if (num_vars == 0) throw InvalidArgument("linear program needs at least one variable");
}

void LinearProgram::add_inequality(std::span<const double> coeffs, double rhs) {
    if (coeffs.size() != n_) throw InvalidArgument("inequality row has wrong length");
    ineq_a_.insert(ineq_a_.end(), coeffs.begin(), coeffs.end());
    ineq_b_.push_back(rhs);
}

void LinearProgram::add_equality(std::span<const double> coeffs, double rhs) {
    if (coeffs.size() != n_) throw InvalidArgument("equality row has wrong length");
    eq_a_.insert(eq_a_.end(), coeffs.begin(), coeffs.end());
    eq_b_.push_back(rhs);
}

void LinearProgram::validate() const {
    if (c_.size() != n_ || lo_.size() != n_ || hi_.size() != n_)
        throw InvalidArgument("objective or bounds do not match the variable count");
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!finite(c_) || !finite(ineq_a_) || !finite(ineq_b_) || !finite(eq_a_) || !finite(eq_b_) || !finite(lo_))
        throw InvalidArgument("linear program has non-finite coefficients or lower bounds");
    for (double h : hi_)
        if (std::isnan(h) || h == -kInf) throw InvalidArgument("upper bounds must be finite or +inf");
}

std::string to_string(Status s) {
    switch (s) {
        case Status::optimal: return "optimal";
        case Status::infeasible: return "infeasible";
        case Status::unbounded: return "unbounded";
    }
    return "?";
}

namespace {

// Dense tableau over shifted variables y = x - lower >= 0. Columns are
// [structural | slack/surplus | artificial | rhs].
class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), cols_(cols), w_(cols + 1), t_(rows * (cols + 1), 0.0) {}

    double& at(std::size_t i, std::size_t j) noexcept { return t_[i * w_ + j]; }
    double at(std::size_t i, std::size_t j) const noexcept { return t_[i * w_ + j]; }
    double& rhs(std::size_t i) noexcept { return t_[i * w_ + cols_]; }
    double rhs(std::size_t i) const noexcept { return t_[i * w_ + cols_]; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return cols_; }

    void pivot(std::size_t r, std::size_t e, std::vector<double>& reduced) {
        double* pr = &t_[r * w_];
        const double inv = 1.0 / pr[e];
        for (std::size_t k = 0; k < w_; ++k) pr[k] *= inv;
        pr[e] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* pi = &t_[i * w_];
            const double f = pi[e];
            if (f == 0.0) continue;
            for (std::size_t k = 0; k < w_; ++k) pi[k] -= f * pr[k];
            pi[e] = 0.0;
            if (pi[cols_] < 0.0 && pi[cols_] > -1e-13) pi[cols_] = 0.0;
        }
        const double f = reduced[e];
        if (f != 0.0) {
            for (std::size_t k = 0; k < cols_; ++k) reduced[k] -= f * pr[k];
            reduced[e] = 0.0;
        }
    }

    void remove_row(std::size_t r) {
        if (r + 1 != m_) std::copy_n(&t_[(m_ - 1) * w_], w_, &t_[r * w_]);
        --m_;
        t_.resize(m_ * w_);
    }

private:
    std::size_t m_, cols_, w_;
    std::vector<double> t_;
};

struct Engine {
    Tableau tab;
    std::vector<std::size_t> basis;
    double tol;
    PivotRule rule;
    std::size_t max_iter;
    std::size_t iterations = 0;

    // Runs primal simplex over columns [0, allowed) maximizing the costs in
    // `cost`. Returns false if the program is unbounded.
    bool run(const std::vector<double>& cost, std::size_t allowed) {
        std::vector<double> reduced(tab.cols(), 0.0);
        for (std::size_t j = 0; j < tab.cols(); ++j) reduced[j] = cost[j];
        for (std::size_t i = 0; i < tab.rows(); ++i) {
            const double cb = cost[basis[i]];
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < tab.cols(); ++j) reduced[j] -= cb * tab.at(i, j);
        }
        for (auto b : basis) reduced[b] = 0.0;

        std::size_t stall = 0;
        while (true) {
            if (iterations >= max_iter) {
                std::ostringstream msg;
                msg << "simplex iteration cap " << max_iter << " reached (" << tab.rows() << " rows, " << tab.cols()
                    << " columns)";
                throw NumericalFailure(msg.str());
            }
            const bool use_bland = rule == PivotRule::bland || stall > 50;
            std::size_t enter = allowed;
            double best = tol;
            for (std::size_t j = 0; j < allowed; ++j) {
                if (reduced[j] > best) {
                    enter = j;
                    if (use_bland) break;
                    best = reduced[j];
                }
            }
            if (enter == allowed) return true;

            std::size_t leave = tab.rows();
            double ratio = 0.0;
            for (std::size_t i = 0; i < tab.rows(); ++i) {
                const double a = tab.at(i, enter);
                if (a <= tol) continue;
                const double r = std::max(0.0, tab.rhs(i)) / a;
                if (leave == tab.rows()) {
                    leave = i;
                    ratio = r;
                    continue;
                }
                const double slack = 1e-12 * (1.0 + ratio);
                if (r < ratio - slack) {
                    leave = i;
                    ratio = r;
                } else if (r <= ratio + slack && basis[i] < basis[leave]) {
                    leave = i;
                    ratio = std::min(ratio, r);
                }
            }
            if (leave == tab.rows()) return false;
            stall = ratio == 0.0 ? stall + 1 : 0;
            tab.pivot(leave, enter, reduced);
            basis[leave] = enter;
            ++iterations;
        }
    }
};

double max_residual(const LinearProgram& lp, const std::vector<double>& x) {
    double worst = 0.0;
    const std::size_t n = lp.num_vars();
    for (std::size_t i = 0; i < lp.num_inequalities(); ++i) {
        auto a = lp.inequality_row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * x[j];
        worst = std::max(worst, s - lp.inequality_rhs(i));
    }
    for (std::size_t i = 0; i < lp.num_equalities(); ++i) {
        auto a = lp.equality_row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += a[j] * x[j];
        worst = std::max(worst, std::abs(s - lp.equality_rhs(i)));
    }
    for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, lp.lower()[j] - x[j]);
        worst = std::max(worst, x[j] - lp.upper()[j]);
    }
    return worst;
}

}  // namespace

Solution solve(const LinearProgram& lp, const SolverOptions& opts) {
    lp.validate();
    const std::size_t n = lp.num_vars();
    const double tol = opts.tol;

    struct Row {
        std::vector<double> a;
        double rhs;
        bool equality;
    };
    std::vector<Row> rows;
    auto shifted_rhs = [&](std::span<const double> a, double b) {
        double s = b;
        for (std::size_t j = 0; j < n; ++j) s -= a[j] * lp.lower()[j];
        return s;
    };
    for (std::size_t i = 0; i < lp.num_inequalities(); ++i) {
        auto a = lp.inequality_row(i);
        rows.push_back({{a.begin(), a.end()}, shifted_rhs(a, lp.inequality_rhs(i)), false});
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (lp.upper()[j] == kInf) continue;
        std::vector<double> a(n, 0.0);
        a[j] = 1.0;
        rows.push_back({std::move(a), lp.upper()[j] - lp.lower()[j], false});
    }
    for (std::size_t i = 0; i < lp.num_equalities(); ++i) {
        auto a = lp.equality_row(i);
        rows.push_back({{a.begin(), a.end()}, shifted_rhs(a, lp.equality_rhs(i)), true});
    }

    // Row equilibration; all-zero rows are either trivially satisfied or
    // prove infeasibility on their own.
    Solution sol;
    std::vector<Row> kept;
    for (auto& r : rows) {
        double scale = 0.0;
        for (double v : r.a) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) {
            const bool ok = r.equality ? std::abs(r.rhs) <= tol : r.rhs >= -tol;
            if (!ok) return sol;
            continue;
        }
        for (double& v : r.a) v /= scale;
        r.rhs /= scale;
        kept.push_back(std::move(r));
    }

    std::size_t n_slack = 0, n_art = 0;
    for (const auto& r : kept) {
        if (!r.equality) ++n_slack;
        if (r.equality || r.rhs < 0.0) ++n_art;
    }
    const std::size_t m = kept.size();
    const std::size_t cols = n + n_slack + n_art;
    Engine eng{Tableau(m, cols), std::vector<std::size_t>(m), tol, opts.rule,
               opts.max_iterations ? opts.max_iterations : 50 * (m + cols) + 1000};

    std::size_t slack = n, art = n + n_slack;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& r = kept[i];
        const double sign = r.rhs < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) eng.tab.at(i, j) = sign * r.a[j];
        eng.tab.rhs(i) = sign * r.rhs;
        if (!r.equality) eng.tab.at(i, slack) = sign;
        if (r.equality || r.rhs < 0.0) {
            eng.tab.at(i, art) = 1.0;
            eng.basis[i] = art++;
        } else {
            eng.basis[i] = slack;
        }
        if (!r.equality) ++slack;
    }

    const std::size_t first_art = n + n_slack;
    if (n_art > 0) {
        std::vector<double> cost(cols, 0.0);
        std::fill(cost.begin() + static_cast<std::ptrdiff_t>(first_art), cost.end(), -1.0);
        eng.run(cost, cols);
        double infeas = 0.0, rhs_scale = 1.0;
        for (std::size_t i = 0; i < eng.tab.rows(); ++i) {
            if (eng.basis[i] >= first_art) infeas += eng.tab.rhs(i);
        }
        for (const auto& r : kept) rhs_scale = std::max(rhs_scale, std::abs(r.rhs));
        if (infeas > tol * rhs_scale * 10.0) {
            sol.iterations = eng.iterations;
            return sol;
        }
        // Pivot remaining (zero-level) artificials out of the basis; rows
        // where that is impossible are redundant.
        std::vector<double> dummy(cols, 0.0);
        for (std::size_t i = 0; i < eng.tab.rows();) {
            if (eng.basis[i] < first_art) {
                ++i;
                continue;
            }
            std::size_t best = first_art;
            double mag = tol;
            for (std::size_t j = 0; j < first_art; ++j) {
                if (std::abs(eng.tab.at(i, j)) > mag) {
                    mag = std::abs(eng.tab.at(i, j));
                    best = j;
                }
            }
            if (best == first_art) {
                eng.tab.remove_row(i);
                eng.basis[i] = eng.basis.back();
                eng.basis.pop_back();
                continue;
            }
            eng.tab.pivot(i, best, dummy);
            eng.basis[i] = best;
            ++i;
        }
    }

    std::vector<double> cost(cols, 0.0);
    std::copy(lp.objective().begin(), lp.objective().end(), cost.begin());
    const bool bounded = eng.run(cost, first_art);
    sol.iterations = eng.iterations;
    if (!bounded) {
        sol.status = Status::unbounded;
        return sol;
    }

    sol.status = Status::optimal;
    sol.x = lp.lower();
    for (std::size_t i = 0; i < eng.tab.rows(); ++i)
        if (eng.basis[i] < n) sol.x[eng.basis[i]] += std::max(0.0, eng.tab.rhs(i));
    for (std::size_t j = 0; j < n; ++j) sol.objective_value += lp.objective()[j] * sol.x[j];
    sol.max_residual = max_residual(lp, sol.x);
    return sol;
}

void dump(const LinearProgram& lp, std::ostream& out) {
    const std::size_t n = lp.num_vars();
    auto row = [&](std::span<const double> a) {
        for (std::size_t j = 0; j < n; ++j)
            if (a[j] != 0.0) out << ' ' << (a[j] >= 0 ? "+" : "") << a[j] << "*x" << j;
    };
    out.precision(17);
    out << "maximize";
    row(lp.objective());
    out << "\nsubject to\n";
    for (std::size_t i = 0; i < lp.num_inequalities(); ++i) {
        out << "  c" << i << ':';
        row(lp.inequality_row(i));
        out << " <= " << lp.inequality_rhs(i) << '\n';
    }
    for (std::size_t i = 0; i < lp.num_equalities(); ++i) {
        out << "  e" << i << ':';
        row(lp.equality_row(i));
        out << " = " << lp.equality_rhs(i) << '\n';
    }
    out << "bounds\n";
    for (std::size_t j = 0; j < n; ++j) out << "  " << lp.lower()[j] << " <= x" << j << " <= " << lp.upper()[j] << '\n';
    out << "end\n";
}

}  // namespace geocover::lp
