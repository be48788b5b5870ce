#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eans/params.hpp"

namespace eans {

/// Sparse gradient keyed by (table id, row). Repeated contributions to a row
/// are summed in 64-bit. Rows are kept in first-touch order, so iteration is
/// deterministic. Storage is reserved for every row up front, so spans
/// returned by row() stay valid until clear().
class GradAccumulator {
 public:
  GradAccumulator() = default;

  template <typename Real>
  explicit GradAccumulator(const ModelParams<Real>& p) {
    for (const auto& t : p.tables) {
      slabs_.push_back(Slab{t.cols, std::vector<std::int32_t>(t.rows, -1), {},
                            {}});
      slabs_.back().values.reserve(t.data.size());
    }
  }

  int num_tables() const { return static_cast<int>(slabs_.size()); }

  /// Gradient row for (table, r); zero-filled on first touch.
  std::span<double> row(int table, std::int32_t r) {
    auto& s = slabs_[table];
    auto& slot = s.slot[r];
    if (slot < 0) {
      slot = static_cast<std::int32_t>(s.touched.size());
      s.touched.push_back(r);
      s.values.resize(s.values.size() + s.cols, 0.0);
    }
    return {s.values.data() + static_cast<std::size_t>(slot) * s.cols,
            static_cast<std::size_t>(s.cols)};
  }

  bool touched(int table, std::int32_t r) const {
    return slabs_[table].slot[r] >= 0;
  }

  std::span<const double> get(int table, std::int32_t r) const {
    const auto& s = slabs_[table];
    const auto slot = s.slot[r];
    if (slot < 0) return {};
    return {s.values.data() + static_cast<std::size_t>(slot) * s.cols,
            static_cast<std::size_t>(s.cols)};
  }

  const std::vector<std::int32_t>& touched_rows(int table) const {
    return slabs_[table].touched;
  }

  std::size_t num_touched() const {
    std::size_t n = 0;
    for (const auto& s : slabs_) n += s.touched.size();
    return n;
  }

  void clear() {
    for (auto& s : slabs_) {
      for (auto r : s.touched) s.slot[r] = -1;
      s.touched.clear();
      s.values.clear();
    }
  }

 private:
  struct Slab {
    int cols;
    std::vector<std::int32_t> slot;
    std::vector<std::int32_t> touched;
    std::vector<double> values;
  };
  std::vector<Slab> slabs_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Real>
struct OptimizerState {
  AdamConfig cfg;
  std::int64_t step = 0;
  std::vector<std::vector<Real>> m;  // per table, same shape as the table
  std::vector<std::vector<Real>> v;

  OptimizerState() = default;
  OptimizerState(const ModelParams<Real>& p, AdamConfig c) : cfg(c) {
    for (const auto& t : p.tables) {
      m.emplace_back(t.data.size(), Real(0));
      v.emplace_back(t.data.size(), Real(0));
    }
  }
};

/// One Adam update restricted to the rows present in `grads`. Bias
/// correction uses the global step counter, which advances once per call.
/// Throws NumericError naming the row if any gradient entry is non-finite;
/// nothing is modified in that case.
template <typename Real>
void adam_step(OptimizerState<Real>& state, ModelParams<Real>& params,
               const GradAccumulator& grads) {
  for (int t = 0; t < grads.num_tables(); ++t)
    for (auto r : grads.touched_rows(t))
      for (double g : grads.get(t, r))
        if (!std::isfinite(g))
          throw NumericError("non-finite gradient in table '" +
                             params.table(t).name + "' row " +
                             std::to_string(r));

  ++state.step;
  const auto& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (int t = 0; t < grads.num_tables(); ++t) {
    auto& table = params.table(t);
    const auto cols = static_cast<std::size_t>(table.cols);
    for (auto r : grads.touched_rows(t)) {
      const auto g = grads.get(t, r);
      const std::size_t base = static_cast<std::size_t>(r) * cols;
      for (std::size_t j = 0; j < cols; ++j) {
        const double m = c.beta1 * static_cast<double>(state.m[t][base + j]) +
                         (1.0 - c.beta1) * g[j];
        const double v = c.beta2 * static_cast<double>(state.v[t][base + j]) +
                         (1.0 - c.beta2) * g[j] * g[j];
        state.m[t][base + j] = static_cast<Real>(m);
        state.v[t][base + j] = static_cast<Real>(v);
        const double update = c.lr * (m / bc1) / (std::sqrt(v / bc2) + c.eps);
        table.data[base + j] =
            static_cast<Real>(static_cast<double>(table.data[base + j]) - update);
      }
    }
  }
}

}  // namespace eans
