#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "coordsim/core.hpp"
#include "coordsim/rng.hpp"

namespace coordsim {

namespace detail {

inline void permute_axes_inplace(std::vector<Alphabet>& axes, std::vector<double>& probs) {
  std::vector<std::size_t> order(axes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return axes[a].name < axes[b].name; });
  bool sorted = true;
  for (std::size_t i = 0; i < order.size(); ++i) sorted &= (order[i] == i);
  if (sorted) return;

  std::vector<Alphabet> new_axes;
  new_axes.reserve(axes.size());
  for (auto i : order) new_axes.push_back(axes[i]);

  std::vector<double> new_probs(probs.size());
  Symbols sym(axes.size(), 0);
  std::size_t src = 0;
  do {
    Symbols dst_sym(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) dst_sym[i] = sym[order[i]];
    new_probs[flat_index(new_axes, dst_sym)] = probs[src];
    ++src;
  } while (advance_symbols(axes, sym));

  axes = std::move(new_axes);
  probs = std::move(new_probs);
}

inline void check_axes(const std::vector<Alphabet>& axes) {
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (axes[i].size < 1) throw shape_error("axis '" + axes[i].name + "' has size < 1");
    if (axes[i].name.empty()) throw shape_error("axis with empty name");
    if (i > 0 && axes[i - 1].name == axes[i].name)
      throw shape_error("duplicate axis name '" + axes[i].name + "'");
  }
}

}  // namespace detail

/// Dense pmf over a product of named finite alphabets. Axes are kept in
/// canonical order (sorted by name); values are immutable after construction.
/// Normalization drift is corrected once, here; every operation rebuilds
/// through this constructor so downstream code can assume a valid pmf.
class LabeledJoint {
 public:
  LabeledJoint(std::vector<Alphabet> axes, std::vector<double> probs,
               double sum_tol = 1e-12, bool uniform_filled = false)
      : axes_(std::move(axes)), probs_(std::move(probs)), uniform_filled_(uniform_filled) {
    detail::permute_axes_inplace(axes_, probs_);
    detail::check_axes(axes_);
    if (probs_.size() != cell_count(axes_))
      throw shape_error("probability array has " + std::to_string(probs_.size()) +
                        " cells, axes require " + std::to_string(cell_count(axes_)));
    KahanSum total;
    for (auto& p : probs_) {
      if (p < 0.0) {
        if (p < -1e-12) throw shape_error("negative probability entry");
        p = 0.0;
      }
      total.add(p);
    }
    const double s = total.value();
    if (std::abs(s - 1.0) > sum_tol)
      throw shape_error("probabilities sum to " + std::to_string(s) +
                        ", outside tolerance " + std::to_string(sum_tol));
    if (s != 1.0) {
      for (auto& p : probs_) p /= s;
    }
  }

  const std::vector<Alphabet>& axes() const { return axes_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t cells() const { return probs_.size(); }
  double prob(const Symbols& sym) const { return probs_[flat_index(axes_, sym)]; }
  double prob_flat(std::size_t i) const { return probs_[i]; }

  int axis_pos(std::string_view name) const {
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (axes_[i].name == name) return static_cast<int>(i);
    return -1;
  }
  bool has_axis(std::string_view name) const { return axis_pos(name) >= 0; }

  /// True if any ancestor operation filled a zero-mass conditional slice
  /// with the uniform distribution.
  bool uniform_filled() const { return uniform_filled_; }

 private:
  std::vector<Alphabet> axes_;
  std::vector<double> probs_;
  bool uniform_filled_ = false;
};

enum class ZeroRowPolicy { reject, uniform_fill };

/// Row-stochastic conditional pmf P(out | in). In- and out-axes are each kept
/// in canonical order; storage is [in..., out...] row-major with out fastest.
class ChannelKernel {
 public:
  ChannelKernel(std::vector<Alphabet> in_axes, std::vector<Alphabet> out_axes,
                std::vector<double> probs, double row_tol = 1e-12,
                ZeroRowPolicy policy = ZeroRowPolicy::reject) {
    if (in_axes.empty() || out_axes.empty())
      throw shape_error("kernel needs at least one input and one output axis");
    const std::size_t in_cells_raw = cell_count(in_axes);
    const std::size_t out_cells_raw = cell_count(out_axes);
    if (probs.size() != in_cells_raw * out_cells_raw)
      throw shape_error("kernel array size does not match in/out alphabets");

    const auto sorted_order = [](const std::vector<Alphabet>& axes) {
      std::vector<std::size_t> order(axes.size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return axes[a].name < axes[b].name; });
      return order;
    };
    const auto in_order = sorted_order(in_axes);
    const auto out_order = sorted_order(out_axes);
    for (auto i : in_order) in_axes_.push_back(in_axes[i]);
    for (auto i : out_order) out_axes_.push_back(out_axes[i]);
    detail::check_axes(in_axes_);
    detail::check_axes(out_axes_);
    for (const auto& a : in_axes_)
      for (const auto& b : out_axes_)
        if (a.name == b.name) throw shape_error("axis '" + a.name + "' on both kernel sides");

    probs_.resize(probs.size());
    Symbols isym(in_axes.size(), 0);
    Symbols dst_i(in_axes.size(), 0), dst_o(out_axes.size(), 0);
    std::size_t src_row = 0;
    do {
      for (std::size_t i = 0; i < in_order.size(); ++i) dst_i[i] = isym[in_order[i]];
      const std::size_t dst_row = flat_index(in_axes_, dst_i);
      Symbols osym(out_axes.size(), 0);
      std::size_t src_col = 0;
      do {
        for (std::size_t i = 0; i < out_order.size(); ++i) dst_o[i] = osym[out_order[i]];
        probs_[dst_row * out_cells_raw + flat_index(out_axes_, dst_o)] =
            probs[src_row * out_cells_raw + src_col];
        ++src_col;
      } while (advance_symbols(out_axes, osym));
      ++src_row;
    } while (advance_symbols(in_axes, isym));
    filled_rows_.assign(in_cells_raw, false);
    const std::size_t oc = cell_count(out_axes_);
    for (std::size_t r = 0; r < in_cells_raw; ++r) {
      KahanSum total;
      for (std::size_t j = 0; j < oc; ++j) {
        double& p = probs_[r * oc + j];
        if (p < 0.0) {
          if (p < -1e-12) throw shape_error("negative kernel entry");
          p = 0.0;
        }
        total.add(p);
      }
      const double s = total.value();
      if (s == 0.0) {
        if (policy == ZeroRowPolicy::reject)
          throw shape_error("kernel row " + std::to_string(r) + " sums to zero");
        const double u = 1.0 / static_cast<double>(oc);
        for (std::size_t j = 0; j < oc; ++j) probs_[r * oc + j] = u;
        filled_rows_[r] = true;
      } else if (std::abs(s - 1.0) > row_tol) {
        throw shape_error("kernel row " + std::to_string(r) + " sums to " + std::to_string(s));
      } else if (s != 1.0) {
        for (std::size_t j = 0; j < oc; ++j) probs_[r * oc + j] /= s;
      }
    }
  }

  const std::vector<Alphabet>& in_axes() const { return in_axes_; }
  const std::vector<Alphabet>& out_axes() const { return out_axes_; }
  std::size_t in_cells() const { return cell_count(in_axes_); }
  std::size_t out_cells() const { return cell_count(out_axes_); }

  double prob(const Symbols& in, const Symbols& out) const {
    return probs_[flat_index(in_axes_, in) * out_cells() + flat_index(out_axes_, out)];
  }
  double prob_flat(std::size_t in_flat, std::size_t out_flat) const {
    return probs_[in_flat * out_cells() + out_flat];
  }

  std::size_t uniform_fill_count() const {
    std::size_t n = 0;
    for (bool f : filled_rows_) n += f ? 1 : 0;
    return n;
  }
  bool row_filled(std::size_t in_flat) const { return filled_rows_[in_flat]; }

 private:
  std::vector<Alphabet> in_axes_;
  std::vector<Alphabet> out_axes_;
  std::vector<double> probs_;
  std::vector<bool> filled_rows_;
};

inline void require_same_axes(const LabeledJoint& p, const LabeledJoint& q) {
  if (p.axes() != q.axes()) throw shape_error("distributions are over different axes");
}

/// Total variation-style L1 distance, in [0, 2].
inline double l1_distance(const LabeledJoint& p, const LabeledJoint& q) {
  require_same_axes(p, q);
  KahanSum s;
  for (std::size_t i = 0; i < p.cells(); ++i) s.add(std::abs(p.prob_flat(i) - q.prob_flat(i)));
  return s.value();
}

/// KL divergence in bits; +inf when p charges a cell q does not.
inline double kl_divergence(const LabeledJoint& p, const LabeledJoint& q) {
  require_same_axes(p, q);
  KahanSum s;
  for (std::size_t i = 0; i < p.cells(); ++i) {
    const double pi = p.prob_flat(i);
    if (pi == 0.0) continue;
    const double qi = q.prob_flat(i);
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    s.add(pi * std::log2(pi / qi));
  }
  return std::max(0.0, s.value());
}

/// Sum out every axis not named in `keep`.
inline LabeledJoint marginalize(const LabeledJoint& p, const std::vector<std::string>& keep) {
  if (keep.empty()) throw shape_error("marginalize needs at least one axis to keep");
  std::vector<Alphabet> kept;
  for (const auto& name : keep) {
    const int pos = p.axis_pos(name);
    if (pos < 0) throw shape_error("unknown axis '" + name + "'");
    kept.push_back(p.axes()[static_cast<std::size_t>(pos)]);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });
  detail::check_axes(kept);

  std::vector<int> src_pos(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) src_pos[i] = p.axis_pos(kept[i].name);

  std::vector<double> out(cell_count(kept), 0.0);
  Symbols sym(p.axes().size(), 0);
  Symbols ksym(kept.size(), 0);
  std::size_t src = 0;
  do {
    for (std::size_t i = 0; i < kept.size(); ++i) ksym[i] = sym[static_cast<std::size_t>(src_pos[i])];
    out[flat_index(kept, ksym)] += p.prob_flat(src);
    ++src;
  } while (advance_symbols(p.axes(), sym));
  return LabeledJoint(std::move(kept), std::move(out), 1e-12, p.uniform_filled());
}

/// Conditional kernel P(rest | given). Zero-mass slices of the conditioning
/// event are filled with the uniform distribution and flagged.
inline ChannelKernel condition(const LabeledJoint& p, const std::vector<std::string>& given) {
  if (given.empty() || given.size() >= p.axes().size())
    throw shape_error("conditioning set must be a nonempty strict subset of the axes");
  std::vector<Alphabet> in_axes, out_axes;
  for (const auto& name : given) {
    const int pos = p.axis_pos(name);
    if (pos < 0) throw shape_error("unknown axis '" + name + "'");
    in_axes.push_back(p.axes()[static_cast<std::size_t>(pos)]);
  }
  std::sort(in_axes.begin(), in_axes.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });
  detail::check_axes(in_axes);
  for (const auto& ax : p.axes()) {
    if (std::none_of(in_axes.begin(), in_axes.end(),
                     [&](const Alphabet& a) { return a.name == ax.name; }))
      out_axes.push_back(ax);
  }

  std::vector<int> in_pos(in_axes.size()), out_pos(out_axes.size());
  for (std::size_t i = 0; i < in_axes.size(); ++i) in_pos[i] = p.axis_pos(in_axes[i].name);
  for (std::size_t i = 0; i < out_axes.size(); ++i) out_pos[i] = p.axis_pos(out_axes[i].name);

  const std::size_t oc = cell_count(out_axes);
  std::vector<double> probs(cell_count(in_axes) * oc, 0.0);
  Symbols sym(p.axes().size(), 0);
  Symbols isym(in_axes.size(), 0), osym(out_axes.size(), 0);
  std::size_t src = 0;
  do {
    for (std::size_t i = 0; i < in_axes.size(); ++i) isym[i] = sym[static_cast<std::size_t>(in_pos[i])];
    for (std::size_t i = 0; i < out_axes.size(); ++i) osym[i] = sym[static_cast<std::size_t>(out_pos[i])];
    probs[flat_index(in_axes, isym) * oc + flat_index(out_axes, osym)] += p.prob_flat(src);
    ++src;
  } while (advance_symbols(p.axes(), sym));

  // Rows hold P(in, out); the constructor normalizes each row by P(in).
  // A zero row can only happen for a zero-mass conditioning event.
  std::vector<double> row_sums(cell_count(in_axes), 0.0);
  for (std::size_t r = 0; r < row_sums.size(); ++r) {
    KahanSum s;
    for (std::size_t j = 0; j < oc; ++j) s.add(probs[r * oc + j]);
    row_sums[r] = s.value();
    if (row_sums[r] > 0.0)
      for (std::size_t j = 0; j < oc; ++j) probs[r * oc + j] /= row_sums[r];
  }
  return ChannelKernel(std::move(in_axes), std::move(out_axes), std::move(probs), 1e-12,
                       ZeroRowPolicy::uniform_fill);
}

/// P(x) * K(y | x_in) over the union of axes. Requires K's inputs to be axes
/// of P and K's outputs to be new.
inline LabeledJoint chain(const LabeledJoint& p, const ChannelKernel& k) {
  for (const auto& a : k.in_axes()) {
    const int pos = p.axis_pos(a.name);
    if (pos < 0) throw shape_error("kernel input axis '" + a.name + "' missing from distribution");
    if (p.axes()[static_cast<std::size_t>(pos)].size != a.size)
      throw shape_error("axis '" + a.name + "' size mismatch");
  }
  for (const auto& a : k.out_axes())
    if (p.has_axis(a.name)) throw shape_error("axis collision on '" + a.name + "'");

  std::vector<Alphabet> axes = p.axes();
  axes.insert(axes.end(), k.out_axes().begin(), k.out_axes().end());
  std::sort(axes.begin(), axes.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });

  std::vector<int> p_pos(axes.size(), -1), kin_pos(axes.size(), -1), kout_pos(axes.size(), -1);
  for (std::size_t i = 0; i < axes.size(); ++i) {
    p_pos[i] = p.axis_pos(axes[i].name);
    for (std::size_t j = 0; j < k.in_axes().size(); ++j)
      if (k.in_axes()[j].name == axes[i].name) kin_pos[i] = static_cast<int>(j);
    for (std::size_t j = 0; j < k.out_axes().size(); ++j)
      if (k.out_axes()[j].name == axes[i].name) kout_pos[i] = static_cast<int>(j);
  }

  std::vector<double> out(cell_count(axes));
  Symbols sym(axes.size(), 0);
  Symbols psym(p.axes().size(), 0), kisym(k.in_axes().size(), 0), kosym(k.out_axes().size(), 0);
  std::size_t dst = 0;
  do {
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (p_pos[i] >= 0) psym[static_cast<std::size_t>(p_pos[i])] = sym[i];
      if (kin_pos[i] >= 0) kisym[static_cast<std::size_t>(kin_pos[i])] = sym[i];
      if (kout_pos[i] >= 0) kosym[static_cast<std::size_t>(kout_pos[i])] = sym[i];
    }
    out[dst] = p.prob(psym) * k.prob(kisym, kosym);
    ++dst;
  } while (advance_symbols(axes, sym));
  return LabeledJoint(std::move(axes), std::move(out), 1e-12,
                      p.uniform_filled() || k.uniform_fill_count() > 0);
}

/// Independent product of two pmfs over disjoint axis sets.
inline LabeledJoint tensor_product(const LabeledJoint& p, const LabeledJoint& q) {
  for (const auto& a : q.axes())
    if (p.has_axis(a.name)) throw shape_error("axis collision on '" + a.name + "'");
  std::vector<Alphabet> axes = p.axes();
  axes.insert(axes.end(), q.axes().begin(), q.axes().end());
  std::sort(axes.begin(), axes.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });

  std::vector<int> p_pos(axes.size(), -1), q_pos(axes.size(), -1);
  for (std::size_t i = 0; i < axes.size(); ++i) {
    p_pos[i] = p.axis_pos(axes[i].name);
    q_pos[i] = q.axis_pos(axes[i].name);
  }
  std::vector<double> out(cell_count(axes));
  Symbols sym(axes.size(), 0);
  Symbols psym(p.axes().size(), 0), qsym(q.axes().size(), 0);
  std::size_t dst = 0;
  do {
    for (std::size_t i = 0; i < axes.size(); ++i) {
      if (p_pos[i] >= 0) psym[static_cast<std::size_t>(p_pos[i])] = sym[i];
      if (q_pos[i] >= 0) qsym[static_cast<std::size_t>(q_pos[i])] = sym[i];
    }
    out[dst++] = p.prob(psym) * q.prob(qsym);
  } while (advance_symbols(axes, sym));
  return LabeledJoint(std::move(axes), std::move(out), 1e-12,
                      p.uniform_filled() || q.uniform_filled());
}

inline constexpr std::size_t kDefaultCellCap = 10'000'000;

/// Product of independent (not necessarily identical) pmfs over the same
/// axes. Axis names are kept; each axis size becomes size^n, with position 0
/// as the most significant digit of the combined symbol index.
inline LabeledJoint product_sequence(const std::vector<const LabeledJoint*>& factors,
                                     std::size_t cell_cap = kDefaultCellCap) {
  if (factors.empty()) throw shape_error("empty product");
  const auto& base = factors.front()->axes();
  for (const auto* f : factors) require_same_axes(*factors.front(), *f);
  const std::size_t n = factors.size();

  std::vector<Alphabet> axes;
  double log_cells = 0.0;
  for (const auto& a : base) log_cells += static_cast<double>(n) * std::log2(double(a.size));
  if (log_cells > std::log2(static_cast<double>(cell_cap)) + 1e-9)
    throw resource_error("product would need 2^" + std::to_string(log_cells) +
                         " cells, cap is " + std::to_string(cell_cap));
  for (const auto& a : base) {
    std::size_t sz = 1;
    for (std::size_t i = 0; i < n; ++i) sz *= static_cast<std::size_t>(a.size);
    axes.push_back({a.name, static_cast<int>(sz)});
  }
  const std::size_t cells = cell_count(axes);
  if (cells > cell_cap)
    throw resource_error("product needs " + std::to_string(cells) + " cells, cap is " +
                         std::to_string(cell_cap));

  // div[ax][i] isolates digit i (position 0 most significant) of axis ax.
  std::vector<std::vector<std::size_t>> div(base.size(), std::vector<std::size_t>(n, 1));
  for (std::size_t ax = 0; ax < base.size(); ++ax)
    for (std::size_t i = n; i-- > 1;)
      div[ax][i - 1] = div[ax][i] * static_cast<std::size_t>(base[ax].size);

  std::vector<double> out(cells);
  Symbols sym(axes.size(), 0);
  Symbols digit(base.size(), 0);
  std::size_t dst = 0;
  do {
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t ax = 0; ax < base.size(); ++ax)
        digit[ax] = static_cast<int>((static_cast<std::size_t>(sym[ax]) / div[ax][i]) %
                                     static_cast<std::size_t>(base[ax].size));
      v *= factors[i]->prob(digit);
    }
    out[dst++] = v;
  } while (advance_symbols(axes, sym));
  return LabeledJoint(std::move(axes), std::move(out), 1e-12);
}

/// i.i.d. n-fold product with vector-valued axes.
inline LabeledJoint product_power(const LabeledJoint& p, int n,
                                  std::size_t cell_cap = kDefaultCellCap) {
  if (n < 1) throw shape_error("product power requires n >= 1");
  if (n == 1) return p;
  std::vector<const LabeledJoint*> fs(static_cast<std::size_t>(n), &p);
  return product_sequence(fs, cell_cap);
}

inline LabeledJoint rename_axis(const LabeledJoint& p, const std::string& from,
                                const std::string& to) {
  const int pos = p.axis_pos(from);
  if (pos < 0) throw shape_error("unknown axis '" + from + "'");
  if (p.has_axis(to)) throw shape_error("axis '" + to + "' already present");
  std::vector<Alphabet> axes = p.axes();
  axes[static_cast<std::size_t>(pos)].name = to;
  return LabeledJoint(std::move(axes), p.probs(), 1e-12, p.uniform_filled());
}

inline ChannelKernel rename_kernel_axis(const ChannelKernel& k, const std::string& from,
                                        const std::string& to) {
  std::vector<Alphabet> in = k.in_axes(), out = k.out_axes();
  bool found = false;
  for (auto& a : in)
    if (a.name == from) { a.name = to; found = true; }
  for (auto& a : out)
    if (a.name == from) { a.name = to; found = true; }
  if (!found) throw shape_error("unknown axis '" + from + "'");
  std::vector<double> probs(k.in_cells() * k.out_cells());
  for (std::size_t r = 0; r < k.in_cells(); ++r)
    for (std::size_t j = 0; j < k.out_cells(); ++j) probs[r * k.out_cells() + j] = k.prob_flat(r, j);
  return ChannelKernel(std::move(in), std::move(out), std::move(probs));
}

inline LabeledJoint uniform_joint(const Alphabet& axis) {
  return LabeledJoint({axis},
                      std::vector<double>(static_cast<std::size_t>(axis.size),
                                          1.0 / static_cast<double>(axis.size)));
}

/// Conditional pmf over the remaining axes given axis == value. A zero-mass
/// slice is filled with the uniform distribution and flagged.
inline LabeledJoint slice_condition(const LabeledJoint& p, const std::string& axis, int value) {
  const int pos = p.axis_pos(axis);
  if (pos < 0) throw shape_error("unknown axis '" + axis + "'");
  if (value < 0 || value >= p.axes()[static_cast<std::size_t>(pos)].size)
    throw shape_error("symbol out of range for axis '" + axis + "'");
  std::vector<Alphabet> axes;
  std::vector<int> src_pos;
  for (std::size_t i = 0; i < p.axes().size(); ++i) {
    if (static_cast<int>(i) == pos) continue;
    axes.push_back(p.axes()[i]);
    src_pos.push_back(static_cast<int>(i));
  }
  if (axes.empty()) throw shape_error("cannot condition away every axis");
  std::vector<double> out(cell_count(axes), 0.0);
  Symbols sym(p.axes().size(), 0);
  std::size_t src = 0;
  KahanSum mass;
  Symbols osym(axes.size(), 0);
  do {
    if (sym[static_cast<std::size_t>(pos)] == value) {
      for (std::size_t i = 0; i < axes.size(); ++i) osym[i] = sym[static_cast<std::size_t>(src_pos[i])];
      const double v = p.prob_flat(src);
      out[flat_index(axes, osym)] += v;
      mass.add(v);
    }
    ++src;
  } while (advance_symbols(p.axes(), sym));
  const double m = mass.value();
  bool filled = p.uniform_filled();
  if (m == 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    filled = true;
  } else {
    for (auto& v : out) v /= m;
  }
  return LabeledJoint(std::move(axes), std::move(out), 1e-12, filled);
}

/// Inverse-CDF draw over the canonical flat order.
inline Symbols sample(const LabeledJoint& p, CounterRng& rng) {
  const double u = rng.next_unit();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.cells(); ++i) {
    const double v = p.prob_flat(i);
    if (v > 0.0) last_positive = i;
    acc += v;
    if (u < acc) return unflat_index(p.axes(), i);
  }
  return unflat_index(p.axes(), last_positive);
}

/// Inverse-CDF draw from one kernel row.
inline Symbols sample_row(const ChannelKernel& k, const Symbols& in, CounterRng& rng) {
  const std::size_t row = flat_index(k.in_axes(), in);
  const double u = rng.next_unit();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < k.out_cells(); ++j) {
    const double v = k.prob_flat(row, j);
    if (v > 0.0) last_positive = j;
    acc += v;
    if (u < acc) return unflat_index(k.out_axes(), j);
  }
  return unflat_index(k.out_axes(), last_positive);
}

}  // namespace coordsim
