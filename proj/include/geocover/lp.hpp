#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace geocover::lp {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// maximize c.x  s.t.  A x <= b,  A_eq x = b_eq,  lower <= x <= upper.
/// Constraint rows are stored dense, row-major. Lower bounds must be finite;
/// upper bounds may be +infinity.
class LinearProgram {
public:
    explicit LinearProgram(std::size_t num_vars);

    std::size_t num_vars() const noexcept { return n_; }
    std::size_t num_inequalities() const noexcept { return ineq_b_.size(); }
    std::size_t num_equalities() const noexcept { return eq_b_.size(); }

    std::vector<double>& objective() noexcept { return c_; }
    const std::vector<double>& objective() const noexcept { return c_; }
    std::vector<double>& lower() noexcept { return lo_; }
    const std::vector<double>& lower() const noexcept { return lo_; }
    std::vector<double>& upper() noexcept { return hi_; }
    const std::vector<double>& upper() const noexcept { return hi_; }

    void add_inequality(std::span<const double> coeffs, double rhs);
    void add_equality(std::span<const double> coeffs, double rhs);

    std::span<const double> inequality_row(std::size_t i) const noexcept { return {ineq_a_.data() + i * n_, n_}; }
    double inequality_rhs(std::size_t i) const noexcept { return ineq_b_[i]; }
    std::span<const double> equality_row(std::size_t i) const noexcept { return {eq_a_.data() + i * n_, n_}; }
    double equality_rhs(std::size_t i) const noexcept { return eq_b_[i]; }

    /// Throws InvalidArgument on size mismatches, non-finite data or
    /// infinite lower bounds.
    void validate() const;

private:
    std::size_t n_;
    std::vector<double> c_, lo_, hi_;
    std::vector<double> ineq_a_, ineq_b_, eq_a_, eq_b_;
};

enum class Status { optimal, infeasible, unbounded };
std::string to_string(Status s);

struct Solution {
    Status status = Status::infeasible;
    std::vector<double> x;          // empty unless optimal
    double objective_value = 0.0;
    std::size_t iterations = 0;
    double max_residual = 0.0;      // worst constraint or bound violation of x
};

enum class PivotRule {
    bland,    // smallest improving index; never cycles
    dantzig,  // largest reduced cost, falls back to Bland on degenerate stalls
};

struct SolverOptions {
    double tol = 1e-9;
    PivotRule rule = PivotRule::bland;
    std::size_t max_iterations = 0;  // 0 = 50 * (rows + columns) + 1000
};

/// Two-phase dense tableau simplex. Deterministic for a given program and
/// options. Throws NumericalFailure when the iteration cap is hit.
Solution solve(const LinearProgram& lp, const SolverOptions& opts = {});

/// Plain-text dump for inspection: objective, rows, bounds.
void dump(const LinearProgram& lp, std::ostream& out);

}  // namespace geocover::lp
