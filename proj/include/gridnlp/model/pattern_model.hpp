#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "gridnlp/model/tape.hpp"

namespace gridnlp::model {

// Evaluation outcome for the non-throwing hot paths.  A failure names the
// pattern and record that produced it so data problems are attributable.
struct EvalStatus {
  bool ok = true;
  index_t pattern = -1;
  index_t record = -1;
  const char* reason = nullptr;
  explicit operator bool() const { return ok; }
  static EvalStatus fail(index_t p, index_t r, const char* why) {
    return EvalStatus{false, p, r, why};
  }
};

// One expression pattern instantiated over homogeneous records: every record
// supplies the same field layout (data values and flat variable indices),
// and constraint records additionally name the row they add into.
struct PatternData {
  index_t n_records = 0;
  index_t n_var_fields = 0;
  index_t n_real_fields = 0;
  std::vector<double> reals;   // n_records x n_real_fields, record-major
  std::vector<index_t> vars;   // n_records x n_var_fields, flat variable ids
  std::vector<index_t> rows;   // n_records, block-relative row ids
};

struct VarBlock {
  index_t id = -1;
};
struct RowBlock {
  index_t id = -1;
};

// Structure-first nonlinear program: a handful of expression patterns, each
// applied to many records, with Jacobian/Hessian slots preassigned per record
// so evaluations write disjoint positions and compress deterministically.
class PatternModel {
public:
  // ---- model building -----------------------------------------------------

  VarBlock add_variable_block(const std::string& name,
                              std::vector<index_t> shape, double lower,
                              double upper, double start) {
    const index_t size = shape_size(shape);
    return add_variable_block(name, std::move(shape),
                              std::vector<double>(size, lower),
                              std::vector<double>(size, upper),
                              std::vector<double>(size, start));
  }

  VarBlock add_variable_block(const std::string& name,
                              std::vector<index_t> shape,
                              std::vector<double> lower,
                              std::vector<double> upper,
                              std::vector<double> start) {
    require_unfrozen("add_variable_block");
    for (const auto& b : var_blocks_)
      if (b.name == name) throw Error("duplicate variable block: " + name);
    const index_t size = shape_size(shape);
    if (static_cast<index_t>(lower.size()) != size ||
        static_cast<index_t>(upper.size()) != size ||
        static_cast<index_t>(start.size()) != size)
      throw Error("variable block " + name + ": bound/start size mismatch");
    for (index_t i = 0; i < size; ++i)
      if (lower[i] > upper[i])
        throw Error("variable block " + name + ": lower above upper");
    VarBlockRec rec;
    rec.name = name;
    rec.shape = std::move(shape);
    rec.offset = n_vars_;
    rec.size = size;
    n_vars_ += size;
    x_lower_.insert(x_lower_.end(), lower.begin(), lower.end());
    x_upper_.insert(x_upper_.end(), upper.begin(), upper.end());
    x_start_.insert(x_start_.end(), start.begin(), start.end());
    var_blocks_.push_back(std::move(rec));
    return VarBlock{static_cast<index_t>(var_blocks_.size()) - 1};
  }

  RowBlock add_constraint_block(const std::string& name, index_t nrows,
                                double lower, double upper) {
    return add_constraint_block(name, nrows,
                                std::vector<double>(nrows, lower),
                                std::vector<double>(nrows, upper));
  }

  RowBlock add_constraint_block(const std::string& name, index_t nrows,
                                std::vector<double> lower,
                                std::vector<double> upper) {
    require_unfrozen("add_constraint_block");
    for (const auto& b : row_blocks_)
      if (b.name == name) throw Error("duplicate constraint block: " + name);
    if (static_cast<index_t>(lower.size()) != nrows ||
        static_cast<index_t>(upper.size()) != nrows)
      throw Error("constraint block " + name + ": bound size mismatch");
    for (index_t i = 0; i < nrows; ++i)
      if (lower[i] > upper[i])
        throw Error("constraint block " + name + ": lower above upper");
    RowBlockRec rec;
    rec.name = name;
    rec.offset = n_cons_;
    rec.size = nrows;
    n_cons_ += nrows;
    row_lower_.insert(row_lower_.end(), lower.begin(), lower.end());
    row_upper_.insert(row_upper_.end(), upper.begin(), upper.end());
    row_blocks_.push_back(std::move(rec));
    return RowBlock{static_cast<index_t>(row_blocks_.size()) - 1};
  }

  index_t add_objective_pattern(const std::string& name, const Expr& expr,
                                PatternData data) {
    require_unfrozen("add_objective_pattern");
    Pattern p;
    p.name = name;
    p.tape = Tape::compile(expr);
    p.is_objective = true;
    validate_data(p, data, /*needs_rows=*/false);
    p.data = std::move(data);
    patterns_.push_back(std::move(p));
    return static_cast<index_t>(patterns_.size()) - 1;
  }

  index_t add_constraint_pattern(const std::string& name, RowBlock block,
                                 const Expr& expr, PatternData data) {
    require_unfrozen("add_constraint_pattern");
    if (block.id < 0 || block.id >= static_cast<index_t>(row_blocks_.size()))
      throw Error("add_constraint_pattern: bad row block");
    Pattern p;
    p.name = name;
    p.tape = Tape::compile(expr);
    p.is_objective = false;
    validate_data(p, data, /*needs_rows=*/true);
    const RowBlockRec& rb = row_blocks_[block.id];
    for (index_t r = 0; r < data.n_records; ++r) {
      if (data.rows[r] < 0 || data.rows[r] >= rb.size)
        throw Error("pattern " + name + ": row out of block range");
      data.rows[r] += rb.offset;  // store flat rows
    }
    p.data = std::move(data);
    patterns_.push_back(std::move(p));
    return static_cast<index_t>(patterns_.size()) - 1;
  }

  // Assign Jacobian/Hessian slots and seal the structure.  No further blocks
  // or patterns can be added; evaluations become available.
  void freeze() {
    require_unfrozen("freeze");
    jac_rows_.clear();
    jac_cols_.clear();
    hess_rows_.clear();
    hess_cols_.clear();
    index_t max_tape = 1, max_fields = 1, max_records = 0;
    for (auto& p : patterns_) {
      const index_t k = p.data.n_var_fields;
      max_tape = std::max(max_tape, static_cast<index_t>(p.tape.code.size()));
      max_fields = std::max(max_fields, k);
      max_records = std::max(max_records, p.data.n_records);

      if (!p.is_objective) {
        p.jac_offset = static_cast<index_t>(jac_rows_.size());
        for (index_t r = 0; r < p.data.n_records; ++r) {
          const index_t* vars = record_vars(p, r);
          for (index_t v = 0; v < k; ++v) {
            jac_rows_.push_back(p.data.rows[r]);
            jac_cols_.push_back(vars[v]);
          }
        }
      } else {
        p.grad_offset = grad_slots_;
        grad_slots_ += p.data.n_records * k;
      }

      p.hess_offset = static_cast<index_t>(hess_rows_.size());
      for (index_t r = 0; r < p.data.n_records; ++r) {
        const index_t* vars = record_vars(p, r);
        for (index_t j = 0; j < k; ++j) {
          for (index_t i = j; i < k; ++i) {
            const index_t gi = vars[i], gj = vars[j];
            hess_rows_.push_back(std::max(gi, gj));
            hess_cols_.push_back(std::min(gi, gj));
            // Distinct fields sharing one variable: the mirrored local entry
            // folds onto the same global slot, so the value doubles.
            if (i != j && gi == gj)
              p.double_slots.push_back(
                  static_cast<index_t>(hess_rows_.size()) - 1);
          }
        }
      }
    }
    workspaces_.clear();
    ws_tape_ = max_tape;
    ws_fields_ = max_fields;
    max_records_ = max_records;
    frozen_ = true;
  }

  // ---- introspection ------------------------------------------------------

  bool frozen() const { return frozen_; }
  index_t n_vars() const { return n_vars_; }
  index_t n_cons() const { return n_cons_; }
  index_t n_patterns() const { return static_cast<index_t>(patterns_.size()); }
  index_t jac_nnz() const {
    require_frozen("jac_nnz");
    return static_cast<index_t>(jac_rows_.size());
  }
  index_t hess_nnz() const {
    require_frozen("hess_nnz");
    return static_cast<index_t>(hess_rows_.size());
  }
  index_t gradient_slots() const {
    require_frozen("gradient_slots");
    return grad_slots_;
  }
  std::span<const index_t> jacobian_rows() const {
    require_frozen("jacobian_rows");
    return jac_rows_;
  }
  std::span<const index_t> jacobian_cols() const {
    require_frozen("jacobian_cols");
    return jac_cols_;
  }
  std::span<const index_t> hessian_rows() const {
    require_frozen("hessian_rows");
    return hess_rows_;
  }
  std::span<const index_t> hessian_cols() const {
    require_frozen("hessian_cols");
    return hess_cols_;
  }
  std::span<const double> x_lower() const { return x_lower_; }
  std::span<const double> x_upper() const { return x_upper_; }
  std::span<const double> x_start() const { return x_start_; }
  std::span<const double> row_lower() const { return row_lower_; }
  std::span<const double> row_upper() const { return row_upper_; }

  index_t block_offset(VarBlock b) const { return var_blocks_.at(b.id).offset; }
  index_t block_size(VarBlock b) const { return var_blocks_.at(b.id).size; }
  index_t row_block_offset(RowBlock b) const { return row_blocks_.at(b.id).offset; }
  index_t row_block_size(RowBlock b) const { return row_blocks_.at(b.id).size; }
  const std::string& pattern_name(index_t p) const { return patterns_.at(p).name; }
  index_t pattern_records(index_t p) const { return patterns_.at(p).data.n_records; }

  index_t flat_index(VarBlock b, index_t i) const {
    const VarBlockRec& rec = var_blocks_.at(b.id);
    if (rec.shape.size() != 1 || i < 0 || i >= rec.shape[0])
      throw Error("flat_index: bad 1-d index into " + rec.name);
    return rec.offset + i;
  }
  index_t flat_index(VarBlock b, index_t i, index_t j) const {
    const VarBlockRec& rec = var_blocks_.at(b.id);
    if (rec.shape.size() != 2 || i < 0 || i >= rec.shape[0] || j < 0 ||
        j >= rec.shape[1])
      throw Error("flat_index: bad 2-d index into " + rec.name);
    return rec.offset + i * rec.shape[1] + j;
  }

  // Number of worker threads for record evaluation.  Values and derivative
  // slots are bitwise independent of this setting: records write disjoint
  // slots, and summed outputs are reduced in canonical record order.
  void set_threads(int n) { threads_ = std::max(1, n); }
  int threads() const { return threads_; }

  // ---- evaluation (frozen model) -------------------------------------------

  EvalStatus evaluate_objective(std::span<const double> x, double& out) const {
    check_eval(x, "evaluate_objective");
    out = 0.0;
    double total = 0.0;
    for (index_t pid = 0; pid < n_patterns(); ++pid) {
      const Pattern& p = patterns_[pid];
      if (!p.is_objective) continue;
      EvalStatus st = run_records(p, pid, [&](Workspace& ws, index_t r) {
        gather(p, r, x, ws.xloc.data());
        if (!tape_forward(p.tape, record_reals(p, r), ws.xloc.data(),
                          ws.vals.data()))
          return false;
        const double v = ws.vals[p.tape.code.size() - 1];
        if (!std::isfinite(v)) return false;
        contrib_[r] = v;
        return true;
      });
      if (!st.ok) return st;
      for (index_t r = 0; r < p.data.n_records; ++r) total += contrib_[r];
    }
    out = total;
    return {};
  }

  EvalStatus evaluate_constraints(std::span<const double> x,
                                  std::span<double> g) const {
    check_eval(x, "evaluate_constraints");
    if (static_cast<index_t>(g.size()) != n_cons_)
      throw Error("evaluate_constraints: bad output size");
    std::fill(g.begin(), g.end(), 0.0);
    for (index_t pid = 0; pid < n_patterns(); ++pid) {
      const Pattern& p = patterns_[pid];
      if (p.is_objective) continue;
      EvalStatus st = run_records(p, pid, [&](Workspace& ws, index_t r) {
        gather(p, r, x, ws.xloc.data());
        if (!tape_forward(p.tape, record_reals(p, r), ws.xloc.data(),
                          ws.vals.data()))
          return false;
        const double v = ws.vals[p.tape.code.size() - 1];
        if (!std::isfinite(v)) return false;
        contrib_[r] = v;
        return true;
      });
      if (!st.ok) return st;
      for (index_t r = 0; r < p.data.n_records; ++r)
        g[p.data.rows[r]] += contrib_[r];
    }
    return {};
  }

  EvalStatus evaluate_gradient(std::span<const double> x,
                               std::span<double> grad) const {
    check_eval(x, "evaluate_gradient");
    if (static_cast<index_t>(grad.size()) != n_vars_)
      throw Error("evaluate_gradient: bad output size");
    std::fill(grad.begin(), grad.end(), 0.0);
    for (index_t pid = 0; pid < n_patterns(); ++pid) {
      const Pattern& p = patterns_[pid];
      if (!p.is_objective) continue;
      const index_t k = p.data.n_var_fields;
      EvalStatus st = run_records(p, pid, [&](Workspace& ws, index_t r) {
        gather(p, r, x, ws.xloc.data());
        if (!tape_forward(p.tape, record_reals(p, r), ws.xloc.data(),
                          ws.vals.data()))
          return false;
        std::fill_n(ws.xbar.data(), k, 0.0);
        tape_reverse(p.tape, ws.vals.data(), ws.adj.data(), 1.0,
                     ws.xbar.data());
        for (index_t v = 0; v < k; ++v) {
          if (!std::isfinite(ws.xbar[v])) return false;
          grad_contrib_[r * k + v] = ws.xbar[v];
        }
        return true;
      });
      if (!st.ok) return st;
      for (index_t r = 0; r < p.data.n_records; ++r) {
        const index_t* vars = record_vars(p, r);
        for (index_t v = 0; v < k; ++v) grad[vars[v]] += grad_contrib_[r * k + v];
      }
    }
    return {};
  }

  EvalStatus evaluate_jacobian(std::span<const double> x,
                               std::span<double> vals) const {
    check_eval(x, "evaluate_jacobian");
    if (static_cast<index_t>(vals.size()) != jac_nnz())
      throw Error("evaluate_jacobian: bad output size");
    for (index_t pid = 0; pid < n_patterns(); ++pid) {
      const Pattern& p = patterns_[pid];
      if (p.is_objective) continue;
      const index_t k = p.data.n_var_fields;
      EvalStatus st = run_records(p, pid, [&](Workspace& ws, index_t r) {
        gather(p, r, x, ws.xloc.data());
        if (!tape_forward(p.tape, record_reals(p, r), ws.xloc.data(),
                          ws.vals.data()))
          return false;
        std::fill_n(ws.xbar.data(), k, 0.0);
        tape_reverse(p.tape, ws.vals.data(), ws.adj.data(), 1.0,
                     ws.xbar.data());
        double* out = vals.data() + p.jac_offset + static_cast<size_t>(r) * k;
        for (index_t v = 0; v < k; ++v) {
          if (!std::isfinite(ws.xbar[v])) return false;
          out[v] = ws.xbar[v];
        }
        return true;
      });
      if (!st.ok) return st;
    }
    return {};
  }

  // Weighted Hessian of obj_weight * f + sum_i row_weights[i] * g_i, written
  // to the preassigned lower-triangle slots (forward-over-reverse, one dual
  // sweep per variable field).
  EvalStatus evaluate_hessian(std::span<const double> x,
                              std::span<const double> row_weights,
                              double obj_weight, std::span<double> vals) const {
    check_eval(x, "evaluate_hessian");
    if (static_cast<index_t>(vals.size()) != hess_nnz())
      throw Error("evaluate_hessian: bad output size");
    if (static_cast<index_t>(row_weights.size()) != n_cons_)
      throw Error("evaluate_hessian: bad weight size");
    for (index_t pid = 0; pid < n_patterns(); ++pid) {
      const Pattern& p = patterns_[pid];
      const index_t k = p.data.n_var_fields;
      const index_t rec_slots = k * (k + 1) / 2;
      EvalStatus st = run_records(p, pid, [&](Workspace& ws, index_t r) {
        const double w = p.is_objective ? obj_weight : row_weights[p.data.rows[r]];
        double* out = vals.data() + p.hess_offset +
                      static_cast<size_t>(r) * rec_slots;
        if (w == 0.0) {
          std::fill_n(out, rec_slots, 0.0);
          return true;
        }
        gather(p, r, x, ws.xloc.data());
        index_t slot = 0;
        for (index_t j = 0; j < k; ++j) {
          for (index_t v = 0; v < k; ++v)
            ws.xloc_dual[v] = Dual(ws.xloc[v], v == j ? 1.0 : 0.0);
          if (!tape_forward(p.tape, record_reals(p, r), ws.xloc_dual.data(),
                            ws.vals_dual.data()))
            return false;
          std::fill_n(ws.xbar_dual.data(), k, Dual(0.0));
          tape_reverse(p.tape, ws.vals_dual.data(), ws.adj_dual.data(),
                       Dual(w), ws.xbar_dual.data());
          for (index_t i = j; i < k; ++i) {
            const double h = ws.xbar_dual[i].d;
            if (!std::isfinite(h)) return false;
            out[slot++] = h;
          }
        }
        return true;
      });
      if (!st.ok) return st;
      for (index_t s : p.double_slots) vals[s] += vals[s];
    }
    return {};
  }

private:
  struct VarBlockRec {
    std::string name;
    std::vector<index_t> shape;
    index_t offset = 0;
    index_t size = 0;
  };
  struct RowBlockRec {
    std::string name;
    index_t offset = 0;
    index_t size = 0;
  };
  struct Pattern {
    std::string name;
    Tape tape;
    PatternData data;
    bool is_objective = false;
    index_t jac_offset = -1;
    index_t grad_offset = -1;
    index_t hess_offset = -1;
    std::vector<index_t> double_slots;
  };
  struct Workspace {
    std::vector<double> vals, adj, xloc, xbar;
    std::vector<Dual> vals_dual, adj_dual, xloc_dual, xbar_dual;
  };

  static index_t shape_size(const std::vector<index_t>& shape) {
    if (shape.empty() || shape.size() > 2)
      throw Error("variable block shape must be 1-d or 2-d");
    index_t size = 1;
    for (index_t d : shape) {
      if (d <= 0) throw Error("variable block shape must be positive");
      size *= d;
    }
    return size;
  }

  void require_unfrozen(const char* what) const {
    if (frozen_) throw Error(std::string(what) + ": model already frozen");
  }
  void require_frozen(const char* what) const {
    if (!frozen_) throw Error(std::string(what) + ": model not frozen yet");
  }
  void check_eval(std::span<const double> x, const char* what) const {
    require_frozen(what);
    if (static_cast<index_t>(x.size()) != n_vars_)
      throw Error(std::string(what) + ": bad x size");
  }

  void validate_data(const Pattern& p, const PatternData& d, bool needs_rows) const {
    if (d.n_records < 0) throw Error("pattern " + p.name + ": negative record count");
    if (p.tape.n_var_fields > d.n_var_fields ||
        p.tape.n_real_fields > d.n_real_fields)
      throw Error("pattern " + p.name + ": expression uses undeclared fields");
    if (static_cast<index_t>(d.vars.size()) != d.n_records * d.n_var_fields)
      throw Error("pattern " + p.name + ": vars size mismatch");
    if (static_cast<index_t>(d.reals.size()) != d.n_records * d.n_real_fields)
      throw Error("pattern " + p.name + ": reals size mismatch");
    if (needs_rows &&
        static_cast<index_t>(d.rows.size()) != d.n_records)
      throw Error("pattern " + p.name + ": rows size mismatch");
    for (index_t v : d.vars)
      if (v < 0 || v >= n_vars_)
        throw Error("pattern " + p.name + ": variable id out of range");
  }

  const index_t* record_vars(const Pattern& p, index_t r) const {
    return p.data.vars.data() + static_cast<size_t>(r) * p.data.n_var_fields;
  }
  const double* record_reals(const Pattern& p, index_t r) const {
    return p.data.reals.data() + static_cast<size_t>(r) * p.data.n_real_fields;
  }
  void gather(const Pattern& p, index_t r, std::span<const double> x,
              double* xloc) const {
    const index_t* vars = record_vars(p, r);
    for (index_t v = 0; v < p.data.n_var_fields; ++v) xloc[v] = x[vars[v]];
  }

  Workspace& workspace(int thread) const {
    if (workspaces_.empty()) {
      workspaces_.resize(static_cast<size_t>(threads_));
      for (auto& ws : workspaces_) {
        ws.vals.resize(ws_tape_);
        ws.adj.resize(ws_tape_);
        ws.xloc.resize(ws_fields_);
        ws.xbar.resize(ws_fields_);
        ws.vals_dual.resize(ws_tape_);
        ws.adj_dual.resize(ws_tape_);
        ws.xloc_dual.resize(ws_fields_);
        ws.xbar_dual.resize(ws_fields_);
      }
      contrib_.resize(max_records_);
      grad_contrib_.resize(static_cast<size_t>(max_records_) * ws_fields_);
    }
    return workspaces_[thread];
  }

  // Run fn(workspace, record) over all records of p, in parallel when
  // configured.  fn returns false to flag a domain/finite failure.
  template <class Fn>
  EvalStatus run_records(const Pattern& p, index_t pid, Fn&& fn) const {
    const index_t n = p.data.n_records;
    workspace(0);  // ensure buffers exist
    if (threads_ == 1 || n < 2 * threads_) {
      Workspace& ws = workspace(0);
      for (index_t r = 0; r < n; ++r)
        if (!fn(ws, r)) return EvalStatus::fail(pid, r, eval_fail_reason(p));
      return {};
    }
    if (static_cast<int>(workspaces_.size()) < threads_) {
      workspaces_.clear();
      workspace(0);
    }
    std::vector<index_t> fail(threads_, -1);
    std::vector<std::thread> pool;
    const index_t chunk = (n + threads_ - 1) / threads_;
    for (int t = 0; t < threads_; ++t) {
      const index_t lo = t * chunk, hi = std::min<index_t>(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, t, lo, hi]() {
        Workspace& ws = workspaces_[t];
        for (index_t r = lo; r < hi; ++r) {
          if (!fn(ws, r)) {
            fail[t] = r;
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (int t = 0; t < threads_; ++t)
      if (fail[t] >= 0)
        return EvalStatus::fail(pid, fail[t], eval_fail_reason(p));
    return {};
  }

  static const char* eval_fail_reason(const Pattern&) {
    return "domain violation or non-finite result";
  }

  bool frozen_ = false;
  index_t n_vars_ = 0, n_cons_ = 0;
  std::vector<VarBlockRec> var_blocks_;
  std::vector<RowBlockRec> row_blocks_;
  std::vector<Pattern> patterns_;
  std::vector<double> x_lower_, x_upper_, x_start_;
  std::vector<double> row_lower_, row_upper_;
  std::vector<index_t> jac_rows_, jac_cols_;
  std::vector<index_t> hess_rows_, hess_cols_;
  index_t grad_slots_ = 0;
  int threads_ = 1;
  index_t ws_tape_ = 1, ws_fields_ = 1, max_records_ = 0;
  mutable std::vector<Workspace> workspaces_;
  mutable std::vector<double> contrib_, grad_contrib_;
};

}  // namespace gridnlp::model
