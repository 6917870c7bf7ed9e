#pragma once

// Linear programming with dual values and best-first branch-and-bound for
// mixed-integer models. Sized for desk-scale master and pricing problems:
// the simplex keeps a dense tableau B^-1 [A I] and supports warm re-solves
// after bound changes (used by the branch-and-bound).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace polydesc::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double feasibility = 1e-7;
  double integrality = 1e-6;
  double optimality = 1e-7;
  double pivot = 1e-9;
};

enum class Sense { kLessEqual, kGreaterEqual, kEqual };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  bool integer = false;
  double objective = 0.0;
  // Initial nonbasic placement for a zero-cost bounded column.
  bool start_at_upper = false;
};

struct Term {
  std::size_t var;
  double coeff;
};

struct Constraint {
  std::vector<Term> terms;
  Sense sense = Sense::kLessEqual;
  double rhs = 0.0;
  std::string name;
};

// Minimization model. Big-M coefficients are ordinary constraint
// coefficients supplied by the caller.
class LinearModel {
 public:
  std::size_t add_variable(std::string name, double lower, double upper,
                           bool integer, double objective = 0.0) {
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
      throw std::invalid_argument("variable '" + name + "' has invalid bounds");
    }
    if (!std::isfinite(objective)) {
      throw std::invalid_argument("variable '" + name + "' has a non-finite cost");
    }
    if (integer && (!std::isfinite(lower) || !std::isfinite(upper))) {
      throw std::invalid_argument("integer variable '" + name + "' needs finite bounds");
    }
    variables_.push_back({std::move(name), lower, upper, integer, objective});
    return variables_.size() - 1;
  }

  std::size_t add_constraint(std::vector<Term> terms, Sense sense, double rhs,
                             std::string name = {}) {
    for (const Term& t : terms) {
      if (t.var >= variables_.size()) {
        throw std::out_of_range("constraint '" + name + "' references an undeclared variable");
      }
      if (!std::isfinite(t.coeff)) {
        throw std::invalid_argument("constraint '" + name + "' has a non-finite coefficient");
      }
    }
    if (!std::isfinite(rhs)) {
      throw std::invalid_argument("constraint '" + name + "' has a non-finite rhs");
    }
    constraints_.push_back({std::move(terms), sense, rhs, std::move(name)});
    return constraints_.size() - 1;
  }

  void set_bounds(std::size_t var, double lower, double upper) {
    Variable& v = variables_.at(var);
    if (std::isnan(lower) || std::isnan(upper) || lower > upper) {
      throw std::invalid_argument("invalid bounds for '" + v.name + "'");
    }
    v.lower = lower;
    v.upper = upper;
  }

  void set_objective(std::size_t var, double coeff) { variables_.at(var).objective = coeff; }
  void set_start_at_upper(std::size_t var, bool on) { variables_.at(var).start_at_upper = on; }
  void set_objective_offset(double offset) { objective_offset_ = offset; }

  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t num_constraints() const { return constraints_.size(); }
  double objective_offset() const { return objective_offset_; }

  double evaluate_objective(std::span<const double> values) const {
    double obj = objective_offset_;
    for (std::size_t j = 0; j < variables_.size(); ++j) obj += variables_[j].objective * values[j];
    return obj;
  }

  double row_activity(std::size_t row, std::span<const double> values) const {
    double a = 0.0;
    for (const Term& t : constraints_[row].terms) a += t.coeff * values[t.var];
    return a;
  }

  // Largest bound or constraint violation of `values`.
  double max_violation(std::span<const double> values) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      worst = std::max({worst, variables_[j].lower - values[j], values[j] - variables_[j].upper});
    }
    for (std::size_t i = 0; i < constraints_.size(); ++i) {
      const double a = row_activity(i, values);
      const double rhs = constraints_[i].rhs;
      switch (constraints_[i].sense) {
        case Sense::kLessEqual: worst = std::max(worst, a - rhs); break;
        case Sense::kGreaterEqual: worst = std::max(worst, rhs - a); break;
        case Sense::kEqual: worst = std::max(worst, std::abs(a - rhs)); break;
      }
    }
    return worst;
  }

  bool is_integral(std::span<const double> values, double tol) const {
    for (std::size_t j = 0; j < variables_.size(); ++j) {
      if (variables_[j].integer && std::abs(values[j] - std::round(values[j])) > tol) return false;
    }
    return true;
  }

 private:
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  double objective_offset_ = 0.0;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kTimeLimit };

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> values;
  // One dual per constraint. Sign convention for minimization: >= rows
  // carry nonnegative duals, <= rows nonpositive duals.
  std::vector<double> duals;
  std::vector<double> reduced_costs;
  double objective = kInf;
  std::size_t iterations = 0;
};

class Deadline {
 public:
  Deadline() = default;
  explicit Deadline(double seconds) {
    if (std::isfinite(seconds)) {
      end_ = std::chrono::steady_clock::now() +
             std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                 std::chrono::duration<double>(std::max(0.0, seconds)));
    }
  }
  bool expired() const { return end_ && std::chrono::steady_clock::now() >= *end_; }
  double remaining_s() const {
    if (!end_) return kInf;
    return std::chrono::duration<double>(*end_ - std::chrono::steady_clock::now()).count();
  }

 private:
  std::optional<std::chrono::steady_clock::time_point> end_;
};

namespace detail {

// Bounded-variable simplex over a dense tableau. Every row gets a slack
// column so the initial basis is the identity and B^-1 is always the slack
// block of the tableau. Row i reads a_i x + s_i = rhs_i with s_i >= 0 for
// <=, s_i <= 0 for >=, s_i = 0 for =.
class DenseSimplex {
 public:
  DenseSimplex(const LinearModel& model, Tolerances tol)
      : tol_(tol),
        rows_(model.num_constraints()),
        structural_(model.num_variables()),
        total_(structural_ + rows_) {
    lower_.resize(total_);
    upper_.resize(total_);
    cost_.assign(total_, 0.0);
    value_.assign(total_, 0.0);
    reduced_.assign(total_, 0.0);
    basic_row_.assign(total_, -1);
    basis_.resize(rows_);
    rhs_.resize(rows_);
    columns_.resize(structural_);

    const auto& vars = model.variables();
    for (std::size_t j = 0; j < structural_; ++j) {
      lower_[j] = vars[j].lower;
      upper_[j] = vars[j].upper;
      cost_[j] = vars[j].objective;
    }
    const auto& cons = model.constraints();
    for (std::size_t i = 0; i < rows_; ++i) {
      rhs_[i] = cons[i].rhs;
      const std::size_t s = structural_ + i;
      switch (cons[i].sense) {
        case Sense::kLessEqual: lower_[s] = 0.0; upper_[s] = kInf; break;
        case Sense::kGreaterEqual: lower_[s] = -kInf; upper_[s] = 0.0; break;
        case Sense::kEqual: lower_[s] = 0.0; upper_[s] = 0.0; break;
      }
      for (const Term& t : cons[i].terms) {
        if (t.coeff != 0.0) columns_[t.var].push_back({i, t.coeff});
      }
    }
    // Merge duplicate (row, var) entries.
    for (auto& col : columns_) {
      std::sort(col.begin(), col.end(), [](const Entry& a, const Entry& b) { return a.row < b.row; });
      std::vector<Entry> merged;
      for (const Entry& e : col) {
        if (!merged.empty() && merged.back().row == e.row) {
          merged.back().coeff += e.coeff;
        } else {
          merged.push_back(e);
        }
      }
      std::erase_if(merged, [](const Entry& e) { return e.coeff == 0.0; });
      col = std::move(merged);
    }

    tab_.assign(rows_ * total_, 0.0);
    for (std::size_t j = 0; j < structural_; ++j) {
      for (const Entry& e : columns_[j]) at(e.row, j) = e.coeff;
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      at(i, structural_ + i) = 1.0;
      basis_[i] = structural_ + i;
      basic_row_[structural_ + i] = static_cast<std::ptrdiff_t>(i);
    }
    // Under the slack basis all duals are zero, so reduced costs are costs.
    for (std::size_t j = 0; j < structural_; ++j) {
      reduced_[j] = cost_[j];
      place_nonbasic(j);
      if (vars[j].start_at_upper && cost_[j] == 0.0 && std::isfinite(upper_[j])) value_[j] = upper_[j];
    }
    recompute_primal();
    recompute_duals();
  }

  std::size_t num_structural() const { return structural_; }
  double lower(std::size_t j) const { return lower_[j]; }
  double upper(std::size_t j) const { return upper_[j]; }

  void set_bounds(std::size_t j, double lo, double up) {
    lower_[j] = lo;
    upper_[j] = up;
    if (basic_row_[j] < 0) {
      const double old = value_[j];
      place_nonbasic(j);
      const double delta = value_[j] - old;
      if (delta != 0.0) {
        for (std::size_t r = 0; r < rows_; ++r) {
          const double a = at(r, j);
          if (a != 0.0) value_[basis_[r]] -= a * delta;
        }
      }
    }
  }

  LpStatus solve(const Deadline& deadline) {
    for (int round = 0; round < 4; ++round) {
      LpStatus status = run(deadline);
      if (status == LpStatus::kTimeLimit) return status;
      if (status == LpStatus::kUnbounded) return status;
      // Rebuild values from B^-1 and the original data, then re-check.
      recompute_primal();
      recompute_duals();
      if (status == LpStatus::kInfeasible) {
        if (max_primal_infeasibility() > tol_.feasibility) return status;
        continue;
      }
      if (max_primal_infeasibility() <= tol_.feasibility &&
          max_dual_infeasibility() <= tol_.optimality) {
        return LpStatus::kOptimal;
      }
      refactor();
    }
    throw SolverError("simplex failed to reach a clean optimum after refactorization");
  }

  LpSolution extract(LpStatus status, const LinearModel& model) const {
    LpSolution sol;
    sol.status = status;
    sol.iterations = iterations_;
    if (status != LpStatus::kOptimal) return sol;
    sol.values.assign(value_.begin(), value_.begin() + static_cast<std::ptrdiff_t>(structural_));
    for (std::size_t j = 0; j < structural_; ++j) {
      // Snap nonbasic values exactly onto their bounds.
      if (basic_row_[j] < 0) continue;
      sol.values[j] = std::clamp(sol.values[j], lower_[j], upper_[j]);
    }
    sol.reduced_costs.assign(reduced_.begin(), reduced_.begin() + static_cast<std::ptrdiff_t>(structural_));
    sol.duals.resize(rows_);
    for (std::size_t i = 0; i < rows_; ++i) sol.duals[i] = -reduced_[structural_ + i];
    sol.objective = model.evaluate_objective(sol.values);
    return sol;
  }

  std::size_t iterations() const { return iterations_; }

  // Appends rows with their slacks basic. The old basis stays dual feasible,
  // so the next solve runs the dual simplex from here.
  void add_rows(std::span<const Constraint> cons) {
    if (cons.empty()) return;
    const std::size_t old_rows = rows_;
    const std::size_t old_total = total_;
    const std::size_t added = cons.size();
    rows_ += added;
    total_ += added;
    std::vector<double> tab(rows_ * total_, 0.0);
    for (std::size_t r = 0; r < old_rows; ++r) {
      std::copy_n(&tab_[r * old_total], old_total, &tab[r * total_]);
    }
    tab_ = std::move(tab);
    lower_.resize(total_);
    upper_.resize(total_);
    cost_.resize(total_, 0.0);
    value_.resize(total_, 0.0);
    reduced_.resize(total_, 0.0);
    basic_row_.resize(total_, -1);
    basis_.resize(rows_);
    rhs_.resize(rows_);
    std::vector<double> a(structural_);
    for (std::size_t q = 0; q < added; ++q) {
      const std::size_t i = old_rows + q;
      const std::size_t s = structural_ + i;
      const Constraint& c = cons[q];
      std::fill(a.begin(), a.end(), 0.0);
      for (const Term& t : c.terms) a[t.var] += t.coeff;
      rhs_[i] = c.rhs;
      switch (c.sense) {
        case Sense::kLessEqual: lower_[s] = 0.0; upper_[s] = kInf; break;
        case Sense::kGreaterEqual: lower_[s] = -kInf; upper_[s] = 0.0; break;
        case Sense::kEqual: lower_[s] = 0.0; upper_[s] = 0.0; break;
      }
      double* row = &tab_[i * total_];
      double activity = 0.0;
      for (std::size_t j = 0; j < structural_; ++j) {
        if (a[j] == 0.0) continue;
        columns_[j].push_back({i, a[j]});
        row[j] = a[j];
        activity += a[j] * value_[j];
      }
      row[s] = 1.0;
      // eliminate the basic columns of the earlier rows
      for (std::size_t r = 0; r < i; ++r) {
        const std::size_t b = basis_[r];
        const double f = b < structural_ ? a[b] : 0.0;
        if (f == 0.0) continue;
        const double* prow = &tab_[r * total_];
        for (std::size_t col = 0; col < total_; ++col) row[col] -= f * prow[col];
        row[b] = 0.0;
      }
      basis_[i] = s;
      basic_row_[s] = static_cast<std::ptrdiff_t>(i);
      value_[s] = c.rhs - activity;
    }
  }

  // Gomory mixed-integer cuts read off the rows of fractional basic integer
  // variables, mapped back to structural space as  c x >= rhs. Only valid
  // for the bounds the tableau was built with.
  std::vector<Constraint> gomory_cuts(const LinearModel& model, std::size_t max_cuts) const {
    const auto& vars = model.variables();
    const auto& cons = model.constraints();
    auto integral_col = [&](std::size_t c) {
      if (c >= structural_ || !vars[c].integer) return false;
      return lower_[c] == std::round(lower_[c]) && (!std::isfinite(upper_[c]) || upper_[c] == std::round(upper_[c]));
    };
    std::vector<std::pair<double, std::size_t>> rows;
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::size_t j = basis_[r];
      if (j >= structural_ || !vars[j].integer) continue;
      const double f0 = value_[j] - std::floor(value_[j]);
      if (f0 < 0.01 || f0 > 0.99) continue;
      rows.emplace_back(-std::min(f0, 1.0 - f0), r);
    }
    std::sort(rows.begin(), rows.end());
    std::vector<Constraint> out;
    std::vector<double> coef(structural_);
    for (const auto& [score, r] : rows) {
      if (out.size() >= max_cuts) break;
      const double f0 = value_[basis_[r]] - std::floor(value_[basis_[r]]);
      std::fill(coef.begin(), coef.end(), 0.0);
      double rhs = 1.0;
      bool ok = true;
      for (std::size_t c = 0; c < total_ && ok; ++c) {
        if (basic_row_[c] >= 0) continue;
        const double a = at(r, c);
        if (std::abs(a) < 1e-11) continue;
        // y = x - l at lower, y = u - x at upper
        int dir;
        if (std::isfinite(lower_[c]) && value_[c] == lower_[c]) {
          dir = 1;
        } else if (std::isfinite(upper_[c]) && value_[c] == upper_[c]) {
          dir = -1;
        } else {
          ok = false;
          break;
        }
        const double ap = dir * a;
        double g;
        if (integral_col(c)) {
          const double fj = ap - std::floor(ap);
          g = fj <= f0 ? fj / f0 : (1.0 - fj) / (1.0 - f0);
        } else {
          g = ap >= 0 ? ap / f0 : -ap / (1.0 - f0);
        }
        if (g == 0.0) continue;
        // g y  =  dir g x - dir g bound
        const double bound = dir > 0 ? lower_[c] : upper_[c];
        const double gx = dir * g;
        rhs += gx * bound;
        if (c < structural_) {
          coef[c] += gx;
        } else {
          // slack s_i = rhs_i - a_i x
          const std::size_t i = c - structural_;
          rhs -= gx * rhs_[i];
          for (const Term& t : cons[i].terms) coef[t.var] -= gx * t.coeff;
        }
      }
      if (!ok) continue;
      double big = 0.0, small = kInf, lhs = 0.0;
      Constraint cut;
      cut.sense = Sense::kGreaterEqual;
      for (std::size_t j = 0; j < structural_; ++j) {
        if (std::abs(coef[j]) < 1e-9) continue;
        big = std::max(big, std::abs(coef[j]));
        small = std::min(small, std::abs(coef[j]));
        lhs += coef[j] * value_[j];
        cut.terms.push_back({j, coef[j]});
      }
      if (cut.terms.empty() || big > 1e6 * small || big > 1e6) continue;
      // Relax by a hair against rounding in the tableau.
      cut.rhs = rhs - 1e-9 * std::max(1.0, std::abs(rhs));
      if (cut.rhs - lhs < 1e-6 * std::max(1.0, big)) continue;
      cut.name = "gmi";
      out.push_back(std::move(cut));
    }
    return out;
  }

 private:
  struct Entry {
    std::size_t row;
    double coeff;
  };

  double& at(std::size_t r, std::size_t c) { return tab_[r * total_ + c]; }
  double at(std::size_t r, std::size_t c) const { return tab_[r * total_ + c]; }

  bool is_fixed(std::size_t j) const { return lower_[j] == upper_[j]; }

  void place_nonbasic(std::size_t j) {
    const bool lo = std::isfinite(lower_[j]);
    const bool up = std::isfinite(upper_[j]);
    if (lo && up) {
      value_[j] = reduced_[j] < 0.0 ? upper_[j] : lower_[j];
    } else if (lo) {
      value_[j] = lower_[j];
    } else if (up) {
      value_[j] = upper_[j];
    } else {
      value_[j] = 0.0;
    }
  }

  bool at_lower(std::size_t j) const { return std::isfinite(lower_[j]) && value_[j] <= lower_[j]; }
  bool at_upper(std::size_t j) const { return std::isfinite(upper_[j]) && value_[j] >= upper_[j]; }

  double infeasibility(std::size_t j) const {
    if (value_[j] < lower_[j] - tol_.feasibility) return lower_[j] - value_[j];
    if (value_[j] > upper_[j] + tol_.feasibility) return value_[j] - upper_[j];
    return 0.0;
  }

  double max_primal_infeasibility() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) worst = std::max(worst, infeasibility(basis_[r]));
    return worst;
  }

  // Dual infeasibility of nonbasic column j at its current bound.
  double dual_infeasibility(std::size_t j) const {
    if (basic_row_[j] >= 0 || is_fixed(j)) return 0.0;
    const double d = reduced_[j];
    const bool can_up = value_[j] < upper_[j];
    const bool can_down = value_[j] > lower_[j];
    double v = 0.0;
    if (can_up && d < 0.0) v = std::max(v, -d);
    if (can_down && d > 0.0) v = std::max(v, d);
    return v;
  }

  double max_dual_infeasibility() const {
    double worst = 0.0;
    for (std::size_t j = 0; j < total_; ++j) worst = std::max(worst, dual_infeasibility(j));
    return worst;
  }

  void recompute_primal() {
    std::vector<double> residual(rhs_);
    for (std::size_t j = 0; j < structural_; ++j) {
      if (basic_row_[j] >= 0 || value_[j] == 0.0) continue;
      for (const Entry& e : columns_[j]) residual[e.row] -= e.coeff * value_[j];
    }
    for (std::size_t i = 0; i < rows_; ++i) {
      const std::size_t s = structural_ + i;
      if (basic_row_[s] < 0) residual[i] -= value_[s];
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      double v = 0.0;
      const double* row = &tab_[r * total_ + structural_];
      for (std::size_t i = 0; i < rows_; ++i) v += row[i] * residual[i];
      value_[basis_[r]] = v;
    }
  }

  void recompute_duals() {
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = cost_[basis_[r]];
      if (cb == 0.0) continue;
      const double* row = &tab_[r * total_ + structural_];
      for (std::size_t i = 0; i < rows_; ++i) y[i] += cb * row[i];
    }
    for (std::size_t j = 0; j < structural_; ++j) {
      double d = cost_[j];
      for (const Entry& e : columns_[j]) d -= y[e.row] * e.coeff;
      reduced_[j] = d;
    }
    for (std::size_t i = 0; i < rows_; ++i) reduced_[structural_ + i] = cost_[structural_ + i] - y[i];
    for (std::size_t r = 0; r < rows_; ++r) reduced_[basis_[r]] = 0.0;
  }

  // Rebuilds the tableau as B^-1 [A I] for the current basis.
  void refactor() {
    const std::size_t m = rows_;
    std::vector<double> b(m * m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t j = basis_[r];
      if (j >= structural_) {
        b[(j - structural_) * m + r] = 1.0;
      } else {
        for (const Entry& e : columns_[j]) b[e.row * m + r] = e.coeff;
      }
    }
    // Gauss-Jordan with partial pivoting on [B | I]. A dependent basic
    // column is swapped out for the slack of an uncovered row.
    std::vector<double> inv(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) inv[i * m + i] = 1.0;
    std::vector<std::size_t> orig(m);
    for (std::size_t i = 0; i < m; ++i) orig[i] = i;
    std::vector<std::size_t> evicted;
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t p = c;
      for (std::size_t r = c + 1; r < m; ++r) {
        if (std::abs(b[r * m + c]) > std::abs(b[p * m + c])) p = r;
      }
      if (std::abs(b[p * m + c]) < 1e-11) {
        const std::size_t j = basis_[c];
        // An unpivoted row still carries a unit entry for its own slack in
        // inv; pick one whose slack is not basic elsewhere.
        p = m;
        for (std::size_t r = c; r < m && p == m; ++r) {
          if (basic_row_[structural_ + orig[r]] < 0) p = r;
        }
        if (p == m) throw SolverError("numerically singular basis during refactorization");
        for (std::size_t r = 0; r < m; ++r) b[r * m + c] = r == p ? 1.0 : 0.0;
        const std::size_t s = structural_ + orig[p];
        basic_row_[j] = -1;
        evicted.push_back(j);
        basis_[c] = s;
        basic_row_[s] = static_cast<std::ptrdiff_t>(c);
      }
      if (p != c) {
        for (std::size_t k = 0; k < m; ++k) {
          std::swap(b[p * m + k], b[c * m + k]);
          std::swap(inv[p * m + k], inv[c * m + k]);
        }
        std::swap(orig[p], orig[c]);
      }
      const double piv = b[c * m + c];
      for (std::size_t k = 0; k < m; ++k) {
        b[c * m + k] /= piv;
        inv[c * m + k] /= piv;
      }
      for (std::size_t r = 0; r < m; ++r) {
        if (r == c) continue;
        const double f = b[r * m + c];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m; ++k) {
          b[r * m + k] -= f * b[c * m + k];
          inv[r * m + k] -= f * inv[c * m + k];
        }
      }
    }
    // Row r of inv corresponds to basis position r.
    std::fill(tab_.begin(), tab_.end(), 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      double* row = &tab_[r * total_];
      const double* irow = &inv[r * m];
      for (std::size_t j = 0; j < structural_; ++j) {
        double v = 0.0;
        for (const Entry& e : columns_[j]) v += irow[e.row] * e.coeff;
        row[j] = v;
      }
      for (std::size_t i = 0; i < m; ++i) row[structural_ + i] = irow[i];
    }
    for (std::size_t r = 0; r < m; ++r) at(r, basis_[r]) = 1.0;
    pivots_since_refactor_ = 0;
    for (std::size_t j : evicted) place_nonbasic(j);
    recompute_primal();
    recompute_duals();
  }

  void pivot(std::size_t r, std::size_t j) {
    double* prow = &tab_[r * total_];
    const double piv = prow[j];
    const double inv = 1.0 / piv;
    nz_.clear();
    for (std::size_t c = 0; c < total_; ++c) {
      if (prow[c] != 0.0) {
        prow[c] *= inv;
        if (std::abs(prow[c]) < 1e-14) {
          prow[c] = 0.0;
        } else {
          nz_.push_back(c);
        }
      }
    }
    prow[j] = 1.0;
    for (std::size_t k = 0; k < rows_; ++k) {
      if (k == r) continue;
      double* row = &tab_[k * total_];
      const double f = row[j];
      if (f == 0.0) continue;
      for (std::size_t c : nz_) row[c] -= f * prow[c];
      row[j] = 0.0;
    }
    const double fd = reduced_[j];
    if (fd != 0.0) {
      for (std::size_t c : nz_) reduced_[c] -= fd * prow[c];
    }
    reduced_[j] = 0.0;
    const std::size_t leaving = basis_[r];
    basic_row_[leaving] = -1;
    basis_[r] = j;
    basic_row_[j] = static_cast<std::ptrdiff_t>(r);
    ++iterations_;
    if (++pivots_since_refactor_ > std::max<std::size_t>(200, 2 * rows_)) refactor();
  }

  // Moves nonbasic j by `step` and updates basic values.
  void shift(std::size_t j, double step) {
    if (step == 0.0) return;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double a = at(r, j);
      if (a != 0.0) value_[basis_[r]] -= a * step;
    }
    value_[j] += step;
  }

  bool primal_feasible() const { return max_primal_infeasibility() <= tol_.feasibility; }
  bool dual_feasible() const { return max_dual_infeasibility() <= tol_.optimality; }

  LpStatus run(const Deadline& deadline) {
    const std::size_t limit = 50 * (rows_ + total_) + 20000;
    std::size_t start = iterations_;
    while (true) {
      if (iterations_ - start > limit) {
        throw SolverError("simplex iteration limit exceeded");
      }
      if (primal_feasible()) {
        return primal_phase2(deadline, limit);
      }
      if (dual_feasible()) {
        LpStatus s = dual_simplex(deadline, limit);
        if (s != LpStatus::kOptimal) return s;
        if (dual_feasible()) return s;
        continue;
      }
      LpStatus s = primal_phase1(deadline, limit);
      if (s != LpStatus::kOptimal) return s;
    }
  }

  // Entering column choice for the primal simplex. `d` holds the pricing
  // vector (true or phase-1 reduced costs). Returns (column, direction).
  std::optional<std::pair<std::size_t, int>> choose_entering(const std::vector<double>& d,
                                                             bool bland) const {
    std::optional<std::pair<std::size_t, int>> best;
    double best_score = 0.0;
    for (std::size_t j = 0; j < total_; ++j) {
      if (basic_row_[j] >= 0 || is_fixed(j)) continue;
      int dir = 0;
      if (d[j] < -tol_.optimality && value_[j] < upper_[j]) dir = 1;
      else if (d[j] > tol_.optimality && value_[j] > lower_[j]) dir = -1;
      if (dir == 0) continue;
      if (bland) return std::make_pair(j, dir);
      const double score = std::abs(d[j]);
      if (score > best_score) {
        best_score = score;
        best = std::make_pair(j, dir);
      }
    }
    return best;
  }

  struct Ratio {
    double step = kInf;
    std::ptrdiff_t row = -1;  // -1: bound flip of the entering column
    double target = 0.0;      // bound the leaving variable lands on
  };

  // Primal ratio test. With `phase1`, infeasible basics block only when
  // they reach the bound they currently violate. Outside Bland mode this is
  // a two-pass Harris test: bounds relaxed by the feasibility tolerance give
  // the step cap, then the largest pivot under the cap wins.
  Ratio ratio_test(std::size_t j, int dir, bool phase1, bool bland) const {
    const double relax = bland ? 0.0 : tol_.feasibility;
    auto limit_of = [&](std::size_t r, double slack, double& target) {
      const double a = at(r, j);
      const std::size_t b = basis_[r];
      const double rate = -a * dir;  // d value_[b] / d step
      const double v = value_[b];
      if (phase1 && v < lower_[b] - tol_.feasibility) {
        if (rate > 0.0) { target = lower_[b]; return (lower_[b] + slack - v) / rate; }
      } else if (phase1 && v > upper_[b] + tol_.feasibility) {
        if (rate < 0.0) { target = upper_[b]; return (upper_[b] - slack - v) / rate; }
      } else if (rate > 0.0) {
        if (std::isfinite(upper_[b])) { target = upper_[b]; return std::max(0.0, (upper_[b] + slack - v) / rate); }
      } else if (std::isfinite(lower_[b])) {
        target = lower_[b];
        return std::max(0.0, (lower_[b] - slack - v) / rate);
      }
      return kInf;
    };
    double cap = kInf;
    if (std::isfinite(upper_[j]) && std::isfinite(lower_[j])) cap = upper_[j] - lower_[j];
    const double flip = cap;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (std::abs(at(r, j)) <= tol_.pivot) continue;
      double t = 0.0;
      cap = std::min(cap, limit_of(r, relax, t));
    }
    Ratio best;
    best.step = flip;
    if (cap == kInf) return best;
    double best_pivot = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double a = at(r, j);
      if (std::abs(a) <= tol_.pivot) continue;
      double target = 0.0;
      const double limit = limit_of(r, 0.0, target);
      if (limit > cap + 1e-12) continue;
      bool better;
      if (best.row < 0) {
        better = true;
      } else if (bland) {
        better = limit < best.step - 1e-12 ||
                 (limit <= best.step + 1e-12 && basis_[r] < basis_[static_cast<std::size_t>(best.row)]);
      } else {
        better = std::abs(a) > best_pivot;
      }
      if (better) {
        best.step = limit;
        best.row = static_cast<std::ptrdiff_t>(r);
        best.target = target;
        best_pivot = std::abs(a);
      }
    }
    // A bound flip of the entering column is preferred when it is no longer.
    if (best.row >= 0 && flip <= best.step) {
      best.row = -1;
      best.step = flip;
    }
    return best;
  }

  void apply_primal_step(std::size_t j, int dir, const Ratio& ratio) {
    shift(j, dir * ratio.step);
    if (ratio.row < 0) {
      value_[j] = dir > 0 ? upper_[j] : lower_[j];
      return;
    }
    const auto r = static_cast<std::size_t>(ratio.row);
    const std::size_t leaving = basis_[r];
    pivot(r, j);
    value_[leaving] = ratio.target;
  }

  LpStatus primal_phase1(const Deadline& deadline, std::size_t limit) {
    std::vector<double> d(total_);
    std::size_t degenerate = 0;
    const std::size_t start = iterations_;
    while (true) {
      if (iterations_ - start > limit) throw SolverError("phase-1 iteration limit exceeded");
      if ((iterations_ & 31) == 0 && deadline.expired()) return LpStatus::kTimeLimit;
      std::vector<double> cb(rows_, 0.0);
      bool any = false;
      for (std::size_t r = 0; r < rows_; ++r) {
        const std::size_t b = basis_[r];
        if (value_[b] < lower_[b] - tol_.feasibility) { cb[r] = -1.0; any = true; }
        else if (value_[b] > upper_[b] + tol_.feasibility) { cb[r] = 1.0; any = true; }
      }
      if (!any) {
        recompute_duals();
        return LpStatus::kOptimal;
      }
      std::fill(d.begin(), d.end(), 0.0);
      for (std::size_t r = 0; r < rows_; ++r) {
        if (cb[r] == 0.0) continue;
        const double* row = &tab_[r * total_];
        for (std::size_t c = 0; c < total_; ++c) d[c] -= cb[r] * row[c];
      }
      for (std::size_t r = 0; r < rows_; ++r) d[basis_[r]] = 0.0;
      const bool bland = degenerate > 50;
      auto entering = choose_entering(d, bland);
      if (!entering) return LpStatus::kInfeasible;
      auto [j, dir] = *entering;
      Ratio ratio = ratio_test(j, dir, true, bland);
      if (ratio.step == kInf) throw SolverError("unbounded phase-1 ray");
      degenerate = ratio.step <= 1e-12 ? degenerate + 1 : 0;
      apply_primal_step(j, dir, ratio);
    }
  }

  LpStatus primal_phase2(const Deadline& deadline, std::size_t limit) {
    recompute_duals();
    std::size_t degenerate = 0;
    const std::size_t start = iterations_;
    while (true) {
      if (iterations_ - start > limit) throw SolverError("phase-2 iteration limit exceeded");
      if ((iterations_ & 31) == 0 && deadline.expired()) return LpStatus::kTimeLimit;
      const bool bland = degenerate > 50;
      auto entering = choose_entering(reduced_, bland);
      if (!entering) return LpStatus::kOptimal;
      auto [j, dir] = *entering;
      Ratio ratio = ratio_test(j, dir, false, bland);
      if (ratio.step == kInf) return LpStatus::kUnbounded;
      degenerate = ratio.step <= 1e-12 ? degenerate + 1 : 0;
      apply_primal_step(j, dir, ratio);
    }
  }

  // Shifts the cost of every nonbasic column away from zero reduced cost by
  // a small deterministic amount. Used when the dual simplex stalls on a
  // dual-degenerate vertex; the caller restores the saved costs.
  void perturb_costs() {
    for (std::size_t j = 0; j < total_; ++j) {
      if (basic_row_[j] >= 0 || is_fixed(j)) continue;
      std::uint64_t z = (j + 1) * 0x9E3779B97F4A7C15ULL;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      z ^= z >> 31;
      const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
      const double delta = (1.0 + u) * 1e-6 * (1.0 + std::abs(cost_[j]));
      if (at_lower(j)) {
        cost_[j] += delta;
      } else if (at_upper(j)) {
        cost_[j] -= delta;
      }
    }
    recompute_duals();
  }

  LpStatus dual_simplex(const Deadline& deadline, std::size_t limit) {
    std::size_t degenerate = 0;
    const std::size_t start = iterations_;
    std::vector<double> saved;
    auto finish = [&](LpStatus s) {
      if (!saved.empty()) {
        cost_ = std::move(saved);
        recompute_duals();
      }
      return s;
    };
    while (true) {
      if (iterations_ - start > limit) throw SolverError("dual simplex iteration limit exceeded");
      if ((iterations_ & 31) == 0 && deadline.expired()) return finish(LpStatus::kTimeLimit);
      if (degenerate > 50 && saved.empty()) {
        saved = cost_;
        perturb_costs();
        degenerate = 0;
      }
      const bool bland = degenerate > 50;
      std::ptrdiff_t leave = -1;
      double worst = 0.0;
      for (std::size_t r = 0; r < rows_; ++r) {
        const double inf = infeasibility(basis_[r]);
        if (inf <= 0.0) continue;
        if (bland) {
          if (leave < 0 || basis_[r] < basis_[static_cast<std::size_t>(leave)]) leave = static_cast<std::ptrdiff_t>(r);
        } else if (inf > worst) {
          worst = inf;
          leave = static_cast<std::ptrdiff_t>(r);
        }
      }
      if (leave < 0) return finish(LpStatus::kOptimal);
      const auto r = static_cast<std::size_t>(leave);
      const std::size_t l = basis_[r];
      const bool increase = value_[l] < lower_[l];
      const double target = increase ? lower_[l] : upper_[l];
      const double* row = &tab_[r * total_];
      // Dual slack of column j for the move that repairs x_l; negative
      // when j cannot move that way.
      auto slack = [&](std::size_t j) {
        const double a = row[j];
        // x_l moves by -a * dx_j; need sign(-a * dx_j) == sign(target - x_l).
        const int dx = (increase ? -1 : 1) * (a > 0.0 ? 1 : -1);
        if (dx > 0 ? value_[j] >= upper_[j] : value_[j] <= lower_[j]) return -1.0;
        return std::max(0.0, dx * reduced_[j]);
      };
      // Harris pass: relaxed ratios give a cap; the largest pivot under it wins.
      double cap = kInf;
      if (!bland) {
        for (std::size_t j = 0; j < total_; ++j) {
          if (basic_row_[j] >= 0 || is_fixed(j) || std::abs(row[j]) <= tol_.pivot) continue;
          const double sl = slack(j);
          if (sl < 0.0) continue;
          cap = std::min(cap, (sl + tol_.optimality) / std::abs(row[j]));
        }
      }
      std::ptrdiff_t enter = -1;
      double best_ratio = kInf;
      double best_pivot = 0.0;
      for (std::size_t j = 0; j < total_; ++j) {
        if (basic_row_[j] >= 0 || is_fixed(j)) continue;
        const double a = row[j];
        if (std::abs(a) <= tol_.pivot) continue;
        const double sl = slack(j);
        if (sl < 0.0) continue;
        const double ratio = sl / std::abs(a);
        bool better;
        if (bland) {
          better = ratio < best_ratio - 1e-12 ||
                   (ratio <= best_ratio + 1e-12 && enter >= 0 && j < static_cast<std::size_t>(enter));
        } else {
          better = ratio <= cap && std::abs(a) > best_pivot;
        }
        if (enter < 0 && (bland || ratio <= cap)) better = true;
        if (better) {
          best_ratio = ratio;
          best_pivot = std::abs(a);
          enter = static_cast<std::ptrdiff_t>(j);
        }
      }
      if (enter < 0) return finish(LpStatus::kInfeasible);
      const auto j = static_cast<std::size_t>(enter);
      const double step = (value_[l] - target) / row[j];
      degenerate = best_ratio <= 1e-12 ? degenerate + 1 : 0;
      shift(j, step);
      pivot(r, j);
      value_[l] = target;
    }
  }

  Tolerances tol_;
  std::size_t rows_;
  std::size_t structural_;
  std::size_t total_;
  std::vector<double> tab_;
  std::vector<double> lower_, upper_, cost_, value_, reduced_, rhs_;
  std::vector<std::ptrdiff_t> basic_row_;
  std::vector<std::size_t> basis_;
  std::vector<std::vector<Entry>> columns_;
  std::vector<std::size_t> nz_;
  std::size_t iterations_ = 0;
  std::size_t pivots_since_refactor_ = 0;
};

}  // namespace detail

inline LpSolution solve_lp(const LinearModel& model, const Deadline& deadline = {},
                           Tolerances tol = {}) {
  detail::DenseSimplex simplex(model, tol);
  const LpStatus status = simplex.solve(deadline);
  return simplex.extract(status, model);
}

enum class MilpStatus { kOptimal, kFeasible, kInfeasible, kTimeLimit };

inline const char* to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::kOptimal: return "optimal";
    case MilpStatus::kFeasible: return "feasible";
    case MilpStatus::kInfeasible: return "infeasible";
    case MilpStatus::kTimeLimit: return "time_limit";
  }
  return "?";
}

struct MilpSolution {
  MilpStatus status = MilpStatus::kInfeasible;
  std::vector<double> values;
  double objective = kInf;
  double bound = -kInf;
  double gap = kInf;
  std::size_t nodes = 0;
};

// Current variable bounds at a branch-and-bound node.
struct NodeBounds {
  std::span<const double> lower;
  std::span<const double> upper;
};

// Result of a node oracle that solves a node's subproblem exactly.
struct NodeResolution {
  bool feasible = false;
  double objective = kInf;
  std::vector<double> values;
};

struct MilpOptions {
  double time_limit_s = kInf;
  double gap_tol = 1e-6;
  Tolerances tol{};
  // Branching priority per variable (higher first); empty means all equal.
  std::vector<int> priority;
  // Variables with priority > 0 are branched on until fixed, even when
  // their LP value is already integral.
  bool branch_until_fixed = false;
  // Optional exact solver for a node; returning nullopt means "not
  // applicable here", and the node is processed by LP as usual.
  std::function<std::optional<NodeResolution>(const NodeBounds&)> oracle;
  // Optional rounding heuristic fed with each node's LP solution. Returned
  // assignments are verified against the model before acceptance.
  std::function<std::optional<std::vector<double>>(std::span<const double>, const NodeBounds&)> heuristic;
  // Called for every feasible solution the search encounters.
  std::function<void(std::span<const double>, double)> on_solution;
  // Candidate incumbents checked before the search starts.
  std::vector<std::vector<double>> initial_solutions;
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  // Rounds of root Gomory cuts; the cuts only tighten the LPs, candidate
  // solutions are still checked against the original model.
  int cut_rounds = 0;
};

namespace detail {

struct BoundChange {
  std::size_t var;
  double lower;
  double upper;
};

struct Node {
  std::shared_ptr<const Node> parent;
  std::optional<BoundChange> change;
  double bound;
  std::size_t depth;
  std::size_t id;
};

class BranchAndBound {
 public:
  BranchAndBound(const LinearModel& model, const MilpOptions& options, const LinearModel* lp_model = nullptr)
      : model_(model), lp_model_(lp_model ? *lp_model : model), options_(options), deadline_(options.time_limit_s) {
    const std::size_t n = model.num_variables();
    root_lower_.resize(n);
    root_upper_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      root_lower_[j] = model.variables()[j].lower;
      root_upper_[j] = model.variables()[j].upper;
      if (model.variables()[j].integer) {
        root_lower_[j] = std::ceil(root_lower_[j] - options.tol.integrality);
        root_upper_[j] = std::floor(root_upper_[j] + options.tol.integrality);
      }
    }
    // Integer costs on integer variables only: objective values are
    // integral, so a node needs a bound below incumbent - 1 to matter.
    integral_objective_ = std::abs(model.objective_offset() - std::round(model.objective_offset())) < 1e-12;
    for (const auto& v : model.variables()) {
      if (v.objective == 0.0) continue;
      if (!v.integer || v.objective != std::round(v.objective)) integral_objective_ = false;
    }
  }

  MilpSolution run() {
    auto cmp = [](const std::shared_ptr<const Node>& a, const std::shared_ptr<const Node>& b) {
      if (a->bound != b->bound) return a->bound > b->bound;
      if (a->depth != b->depth) return a->depth < b->depth;
      return a->id > b->id;
    };
    std::priority_queue<std::shared_ptr<const Node>, std::vector<std::shared_ptr<const Node>>, decltype(cmp)>
        open(cmp);
    open.push(std::make_shared<Node>(Node{nullptr, std::nullopt, -kInf, 0, next_id_++}));

    for (const auto& cand : options_.initial_solutions) {
      if (cand.size() != model_.num_variables()) continue;
      std::vector<double> vals = cand;
      round_integers(vals);
      offer(vals, model_.evaluate_objective(vals), true);
    }

    bool stopped = false;
    std::vector<double> lower, upper;
    while (!open.empty()) {
      if (deadline_.expired() || nodes_ >= options_.node_limit) {
        stopped = true;
        break;
      }
      auto node = open.top();
      if (node->bound >= prune_threshold()) {
        open.pop();
        continue;
      }
      open.pop();
      ++nodes_;
      materialize(*node, lower, upper);
      NodeBounds view{lower, upper};

      if (options_.oracle) {
        if (auto res = options_.oracle(view)) {
          if (res->feasible) offer(res->values, res->objective, /*verify=*/false);
          continue;
        }
      }

      LpSolution lp = solve_node(*node, lower, upper);
      if (lp.status == LpStatus::kTimeLimit) {
        stopped = true;
        open.push(node);
        break;
      }
      if (lp.status == LpStatus::kInfeasible) continue;
      if (lp.status == LpStatus::kUnbounded) {
        throw SolverError("LP relaxation unbounded in branch-and-bound");
      }
      if (lp.objective >= prune_threshold()) continue;

      if (options_.heuristic) {
        if (auto cand = options_.heuristic(lp.values, view)) offer(*cand, model_.evaluate_objective(*cand), true);
      }

      auto branch = choose_branch(lp.values, lower, upper);
      if (!branch) {
        std::vector<double> vals = lp.values;
        round_integers(vals);
        offer(vals, model_.evaluate_objective(vals), true);
        continue;
      }
      const auto [var, down_ub, up_lb] = *branch;
      if (lp.objective >= prune_threshold()) continue;
      if (model_.is_integral(lp.values, options_.tol.integrality)) {
        std::vector<double> vals = lp.values;
        round_integers(vals);
        offer(vals, model_.evaluate_objective(vals), true);
      }
      open.push(std::make_shared<Node>(
          Node{node, BoundChange{var, up_lb, upper[var]}, lp.objective, node->depth + 1, next_id_++}));
      open.push(std::make_shared<Node>(
          Node{node, BoundChange{var, lower[var], down_ub}, lp.objective, node->depth + 1, next_id_++}));
      cache_parent(node->id);
    }

    MilpSolution out;
    out.nodes = nodes_;
    double bound = incumbent_value_;
    if (stopped) {
      while (!open.empty()) {
        bound = std::min(bound, open.top()->bound);
        open.pop();
      }
    }
    if (integral_objective_ && std::isfinite(bound)) bound = std::ceil(bound - 1e-6);
    out.bound = bound;
    if (incumbent_) {
      out.values = *incumbent_;
      out.objective = incumbent_value_;
      out.bound = std::min(out.bound, out.objective);
      out.gap = (out.objective - out.bound) / std::max(1.0, std::abs(out.objective));
      out.status = (!stopped || out.gap <= options_.gap_tol) ? MilpStatus::kOptimal : MilpStatus::kFeasible;
    } else {
      out.status = stopped ? MilpStatus::kTimeLimit : MilpStatus::kInfeasible;
    }
    return out;
  }

 private:
  double prune_threshold() const {
    if (!incumbent_) return kInf;
    if (integral_objective_) return incumbent_value_ - 1.0 + 1e-6;
    return incumbent_value_ - options_.gap_tol * std::max(1.0, std::abs(incumbent_value_));
  }

  void materialize(const Node& node, std::vector<double>& lower, std::vector<double>& upper) const {
    lower = root_lower_;
    upper = root_upper_;
    std::vector<const BoundChange*> path;
    for (const Node* p = &node; p != nullptr; p = p->parent.get()) {
      if (p->change) path.push_back(&*p->change);
    }
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      lower[(*it)->var] = (*it)->lower;
      upper[(*it)->var] = (*it)->upper;
    }
  }

  LpSolution solve_node(const Node& node, const std::vector<double>& lower,
                        const std::vector<double>& upper) {
    std::unique_ptr<DenseSimplex> simplex;
    if (node.parent && last_solved_ && last_solved_id_ == node.parent->id) {
      simplex = std::make_unique<DenseSimplex>(*last_solved_);
      simplex->set_bounds(node.change->var, node.change->lower, node.change->upper);
    } else {
      simplex = std::make_unique<DenseSimplex>(lp_model_, options_.tol);
      for (std::size_t j = 0; j < lower.size(); ++j) {
        if (simplex->lower(j) != lower[j] || simplex->upper(j) != upper[j]) {
          simplex->set_bounds(j, lower[j], upper[j]);
        }
      }
    }
    const LpStatus status = simplex->solve(deadline_);
    LpSolution sol = simplex->extract(status, lp_model_);
    current_ = std::move(simplex);
    return sol;
  }

  void cache_parent(std::size_t id) {
    last_solved_ = std::move(current_);
    last_solved_id_ = id;
  }

  struct Branch {
    std::size_t var;
    double down_upper;
    double up_lower;
  };

  std::optional<Branch> choose_branch(const std::vector<double>& x, const std::vector<double>& lower,
                                      const std::vector<double>& upper) const {
    const auto& vars = model_.variables();
    std::optional<Branch> best;
    int best_prio = std::numeric_limits<int>::min();
    double best_frac = -1.0;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (!vars[j].integer) continue;
      const double f = x[j] - std::floor(x[j]);
      const double dist = std::min(f, 1.0 - f);
      if (dist <= options_.tol.integrality) continue;
      const int prio = options_.priority.empty() ? 0 : options_.priority[j];
      if (prio > best_prio || (prio == best_prio && dist > best_frac + 1e-12)) {
        best_prio = prio;
        best_frac = dist;
        best = Branch{j, std::floor(x[j]), std::ceil(x[j])};
      }
    }
    if (options_.branch_until_fixed && !options_.priority.empty()) {
      // An unfixed prioritized variable outranks fractional lower-priority ones.
      for (std::size_t j = 0; j < vars.size(); ++j) {
        const int prio = options_.priority[j];
        if (!vars[j].integer || prio <= 0 || lower[j] == upper[j]) continue;
        if (best && best_prio >= prio) continue;
        const double v = std::clamp(std::round(x[j]), lower[j], upper[j]);
        if (v < upper[j]) return Branch{j, v, v + 1.0};
        return Branch{j, v - 1.0, v};
      }
    }
    return best;
  }

  void round_integers(std::vector<double>& vals) const {
    const auto& vars = model_.variables();
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (vars[j].integer) vals[j] = std::round(vals[j]);
    }
  }

  void offer(const std::vector<double>& vals, double objective, bool verify) {
    if (verify) {
      if (vals.size() != model_.num_variables()) return;
      if (!model_.is_integral(vals, options_.tol.integrality)) return;
      if (model_.max_violation(vals) > 1e-6) return;
    }
    if (options_.on_solution) options_.on_solution(vals, objective);
    if (!incumbent_ || objective < incumbent_value_) {
      incumbent_ = vals;
      incumbent_value_ = objective;
    }
  }

  const LinearModel& model_;
  const LinearModel& lp_model_;
  const MilpOptions& options_;
  Deadline deadline_;
  std::vector<double> root_lower_, root_upper_;
  std::optional<std::vector<double>> incumbent_;
  double incumbent_value_ = kInf;
  bool integral_objective_ = false;
  std::size_t nodes_ = 0;
  std::size_t next_id_ = 0;
  std::unique_ptr<DenseSimplex> current_;
  std::unique_ptr<DenseSimplex> last_solved_;
  std::size_t last_solved_id_ = std::numeric_limits<std::size_t>::max();
};

}  // namespace detail

// Best-first branch-and-bound over LP relaxations. Branches on the most
// fractional integer variable of the highest priority class.
inline MilpSolution solve_milp(const LinearModel& model, const MilpOptions& options = {}) {
  if (options.cut_rounds <= 0) {
    detail::BranchAndBound bb(model, options);
    return bb.run();
  }
  const Deadline deadline(options.time_limit_s);
  LinearModel lp = model;
  double last = -kInf;
  for (int round = 0; round < options.cut_rounds && !deadline.expired(); ++round) {
    detail::DenseSimplex simplex(lp, options.tol);
    if (simplex.solve(deadline) != LpStatus::kOptimal) break;
    const double obj = simplex.extract(LpStatus::kOptimal, lp).objective;
    // stop once a round barely moves the bound
    if (round > 0 && obj - last < 1e-4 * std::max(1.0, std::abs(obj))) break;
    last = obj;
    auto cuts = simplex.gomory_cuts(lp, std::max<std::size_t>(10, model.num_constraints() / 4));
    if (cuts.empty()) break;
    for (auto& c : cuts) lp.add_constraint(std::move(c.terms), c.sense, c.rhs, c.name);
  }
  MilpOptions rest = options;
  rest.time_limit_s = std::max(0.0, deadline.remaining_s());
  detail::BranchAndBound bb(model, rest, &lp);
  return bb.run();
}

}  // namespace polydesc::milp
