#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coordsim/binning.hpp"
#include "coordsim/joint.hpp"
#include "coordsim/rng.hpp"

namespace coordsim {

/// n-fold product of a one-shot scheme. The binning pair is drawn once and
/// shared by all positions; the per-symbol common randomness (K_i, M_i)
/// carries the i.i.d. structure.
struct FixedLengthScheme {
  OneShotScheme one_shot;
  int n = 1;
};

struct Episode {
  std::vector<int> u, w, x, y, wh, v;
  std::vector<int> k, m;
  int decode_error_count = 0;
};

/// Forward sampler for the coding-side scheme with the per-symbol kernels
/// factored out once. Per symbol: draw (K_i, M_i) uniform, U_i from the
/// source, W_i from the encoder posterior, send X_i through the channel,
/// decode Wh_i, and act with V_i from (Wh_i, Y_i).
class EpisodeSampler {
 public:
  explicit EpisodeSampler(const FixedLengthScheme& s)
      : s_(&s),
        p_u_(marginalize(s.one_shot.target, {"U"})),
        x_given_uw_(condition(marginalize(s.one_shot.target, {"U", "W", "X"}), {"U", "W"})),
        y_given_x_(condition(marginalize(s.one_shot.target, {"X", "Y"}), {"X"})),
        v_given_wy_(condition(marginalize(s.one_shot.target, {"W", "Y", "V"}), {"W", "Y"})) {}

  /// When `fixed_f` is set, M_i = fixed_f[i] instead of a uniform draw.
  Episode run(CounterRng& rng, const std::optional<std::vector<int>>& fixed_f = std::nullopt) const {
    const OneShotScheme& os = s_->one_shot;
    const int n = s_->n;
    if (fixed_f && static_cast<int>(fixed_f->size()) != n)
      throw shape_error("fixed f vector must have length n");
    Episode ep;
    ep.u.resize(static_cast<std::size_t>(n));
    ep.w.resize(static_cast<std::size_t>(n));
    ep.x.resize(static_cast<std::size_t>(n));
    ep.y.resize(static_cast<std::size_t>(n));
    ep.wh.resize(static_cast<std::size_t>(n));
    ep.v.resize(static_cast<std::size_t>(n));
    ep.k.resize(static_cast<std::size_t>(n));
    ep.m.resize(static_cast<std::size_t>(n));

    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const int k = static_cast<int>(rng.next_bounded(static_cast<std::uint64_t>(os.k_axis.size)));
      const int m = fixed_f ? (*fixed_f)[idx]
                            : static_cast<int>(
                                  rng.next_bounded(static_cast<std::uint64_t>(os.m_axis.size)));
      const int u = sample(p_u_, rng)[0];
      // encoder posterior in-axes (K, M, U)
      const int w = sample_row(os.encoder_posterior, {k, m, u}, rng)[0];
      const int x = sample_row(x_given_uw_, {u, w}, rng)[0];
      const int y = sample_row(y_given_x_, {x}, rng)[0];
      // decoder in-axes (K, M, Y)
      const int wh = sample_row(os.slc, {k, m, y}, rng)[0];
      const int v = sample_row(v_given_wy_, {wh, y}, rng)[0];
      ep.k[idx] = k;
      ep.m[idx] = m;
      ep.u[idx] = u;
      ep.w[idx] = w;
      ep.x[idx] = x;
      ep.y[idx] = y;
      ep.wh[idx] = wh;
      ep.v[idx] = v;
      if (wh != w) ++ep.decode_error_count;
    }
    return ep;
  }

 private:
  const FixedLengthScheme* s_;
  LabeledJoint p_u_;
  ChannelKernel x_given_uw_;
  ChannelKernel y_given_x_;
  ChannelKernel v_given_wy_;
};

inline Episode simulate_episode(const FixedLengthScheme& s, CounterRng& rng,
                                const std::optional<std::vector<int>>& fixed_f = std::nullopt) {
  return EpisodeSampler(s).run(rng, fixed_f);
}

/// Per-symbol coding-side action marginal, optionally conditioned on M = m.
inline LabeledJoint rc_symbol_marginal(const OneShotScheme& os, std::optional<int> m = std::nullopt) {
  const LabeledJoint j = m ? slice_condition(os.rc_joint, "M", *m) : os.rc_joint;
  return marginalize(j, {"U", "X", "Y", "V"});
}

/// Per-symbol binning-side action marginal, optionally conditioned on M = m.
inline LabeledJoint rb_symbol_marginal(const OneShotScheme& os, std::optional<int> m = std::nullopt) {
  const LabeledJoint j = m ? slice_condition(os.rb_joint, "M", *m) : os.rb_joint;
  return marginalize(j, {"U", "X", "Y", "V"});
}

/// Exact induced distribution of the coding-side scheme over {U, X, Y, V}^n,
/// conditioned on F = f when given (per-symbol factorization).
inline LabeledJoint exact_induced(const FixedLengthScheme& s,
                                  const std::optional<std::vector<int>>& f = std::nullopt,
                                  std::size_t cell_cap = kDefaultCellCap) {
  if (f && static_cast<int>(f->size()) != s.n) throw shape_error("f vector must have length n");
  std::vector<LabeledJoint> per_symbol;
  per_symbol.reserve(static_cast<std::size_t>(s.n));
  for (int i = 0; i < s.n; ++i) {
    per_symbol.push_back(
        rc_symbol_marginal(s.one_shot, f ? std::optional<int>((*f)[static_cast<std::size_t>(i)])
                                         : std::nullopt));
  }
  std::vector<const LabeledJoint*> ptrs;
  for (const auto& j : per_symbol) ptrs.push_back(&j);
  return product_sequence(ptrs, cell_cap);
}

/// L1 between an induced distribution over {U, X, Y, V}^n and the n-fold
/// product of the target action marginal.
inline double l1_to_target(const FixedLengthScheme& s, const LabeledJoint& induced,
                           std::size_t cell_cap = kDefaultCellCap) {
  const LabeledJoint t1 = marginalize(s.one_shot.target, {"U", "X", "Y", "V"});
  return l1_distance(induced, product_power(t1, s.n, cell_cap));
}

/// Sum of per-symbol distances: an upper bound on the L1 distance between the
/// two n-fold product distributions.
inline double telescoping_bound(const std::vector<double>& per_symbol_distances) {
  KahanSum s;
  for (double d : per_symbol_distances) {
    if (d < 0.0 || d > 2.0) throw shape_error("per-symbol distance outside [0,2]");
    s.add(d);
  }
  return s.value();
}

enum class FStrategy { exhaustive, greedy, sampled };

/// Distance minimized by select_f: coding side conditioned on f against the
/// i.i.d. target, or against the binning side conditioned on the same f.
enum class FMetric { to_target, to_rb };

struct FSelection {
  std::vector<int> f;
  double bound = 0.0;  // exact distance for exhaustive/sampled, telescoping bound for greedy
  bool exact = false;
};

namespace detail {
inline double f_distance(const FixedLengthScheme& s, const std::vector<int>& f, FMetric metric,
                         std::size_t cell_cap) {
  std::vector<LabeledJoint> rc_parts, rb_parts;
  for (int i = 0; i < s.n; ++i) {
    const int m = f[static_cast<std::size_t>(i)];
    rc_parts.push_back(rc_symbol_marginal(s.one_shot, m));
    if (metric == FMetric::to_rb) rb_parts.push_back(rb_symbol_marginal(s.one_shot, m));
  }
  std::vector<const LabeledJoint*> rc_ptrs;
  for (const auto& j : rc_parts) rc_ptrs.push_back(&j);
  const LabeledJoint rc = product_sequence(rc_ptrs, cell_cap);
  if (metric == FMetric::to_target) {
    const LabeledJoint t1 = marginalize(s.one_shot.target, {"U", "X", "Y", "V"});
    return l1_distance(rc, product_power(t1, s.n, cell_cap));
  }
  std::vector<const LabeledJoint*> rb_ptrs;
  for (const auto& j : rb_parts) rb_ptrs.push_back(&j);
  return l1_distance(rc, product_sequence(rb_ptrs, cell_cap));
}
}  // namespace detail

/// Pick an extra-randomness instance F = f. Exhaustive search is exact;
/// greedy reuses the best per-symbol index and reports the telescoping bound;
/// sampled tries k random vectors.
inline FSelection select_f(const FixedLengthScheme& s, FStrategy strategy,
                           FMetric metric = FMetric::to_target, int sample_k = 32,
                           CounterRng* rng = nullptr, std::size_t enumeration_cap = 4096,
                           std::size_t cell_cap = kDefaultCellCap) {
  const int m_bins = s.one_shot.m_axis.size;
  FSelection best;
  switch (strategy) {
    case FStrategy::exhaustive: {
      double combos = std::pow(static_cast<double>(m_bins), s.n);
      if (combos > static_cast<double>(enumeration_cap))
        throw resource_error("exhaustive f search over " + std::to_string(combos) +
                             " vectors exceeds cap " + std::to_string(enumeration_cap));
      std::vector<int> f(static_cast<std::size_t>(s.n), 0);
      best.bound = std::numeric_limits<double>::infinity();
      for (;;) {
        const double d = detail::f_distance(s, f, metric, cell_cap);
        if (d < best.bound) {
          best.bound = d;
          best.f = f;
        }
        int i = s.n - 1;
        while (i >= 0 && f[static_cast<std::size_t>(i)] == m_bins - 1) f[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) break;
        ++f[static_cast<std::size_t>(i)];
      }
      best.exact = true;
      return best;
    }
    case FStrategy::greedy: {
      // per-symbol one-shot distance; all positions share the scheme
      double best_d = std::numeric_limits<double>::infinity();
      int best_m = 0;
      const LabeledJoint t1 = marginalize(s.one_shot.target, {"U", "X", "Y", "V"});
      for (int m = 0; m < m_bins; ++m) {
        const LabeledJoint rc = rc_symbol_marginal(s.one_shot, m);
        const double d = (metric == FMetric::to_target)
                             ? l1_distance(rc, t1)
                             : l1_distance(rc, rb_symbol_marginal(s.one_shot, m));
        if (d < best_d) {
          best_d = d;
          best_m = m;
        }
      }
      best.f.assign(static_cast<std::size_t>(s.n), best_m);
      best.bound = telescoping_bound(std::vector<double>(static_cast<std::size_t>(s.n), best_d));
      best.exact = false;
      return best;
    }
    case FStrategy::sampled: {
      if (rng == nullptr) throw shape_error("sampled f search needs an rng");
      best.bound = std::numeric_limits<double>::infinity();
      for (int t = 0; t < sample_k; ++t) {
        std::vector<int> f(static_cast<std::size_t>(s.n));
        for (auto& mi : f)
          mi = static_cast<int>(rng->next_bounded(static_cast<std::uint64_t>(m_bins)));
        const double d = detail::f_distance(s, f, metric, cell_cap);
        if (d < best.bound) {
          best.bound = d;
          best.f = f;
        }
      }
      best.exact = true;  // exact distance of the best sampled vector
      return best;
    }
  }
  throw shape_error("unknown f strategy");
}

struct EmpiricalL1 {
  double estimate = 0.0;
  double stderr_boot = 0.0;
};

/// Plug-in L1 between the empirical distribution of (U, X, Y, V)^n over
/// episodes and the exact target product; stderr by bootstrap resampling.
inline EmpiricalL1 empirical_l1(const FixedLengthScheme& s,
                                const std::optional<std::vector<int>>& f, long long num_samples,
                                CounterRng& rng, int bootstrap = 100) {
  const LabeledJoint t1 = marginalize(s.one_shot.target, {"U", "X", "Y", "V"});
  const LabeledJoint target = product_power(t1, s.n);
  if (target.cells() > (1u << 20))
    throw resource_error("empirical L1 needs at most 2^20 joint states");

  std::vector<std::int64_t> counts(target.cells(), 0);
  const auto& axes = target.axes();  // (U, V, X, Y) with vector-valued sizes
  const EpisodeSampler sampler(s);
  for (long long e = 0; e < num_samples; ++e) {
    const Episode ep = sampler.run(rng, f);
    // combine per-position symbols into vector-valued axis indices
    std::size_t iu = 0, iv = 0, ix = 0, iy = 0;
    const auto base = [&](const char* name) {
      return static_cast<std::size_t>(
          s.one_shot.target.axes()[static_cast<std::size_t>(s.one_shot.target.axis_pos(name))].size);
    };
    for (int i = 0; i < s.n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      iu = iu * base("U") + static_cast<std::size_t>(ep.u[idx]);
      iv = iv * base("V") + static_cast<std::size_t>(ep.v[idx]);
      ix = ix * base("X") + static_cast<std::size_t>(ep.x[idx]);
      iy = iy * base("Y") + static_cast<std::size_t>(ep.y[idx]);
    }
    Symbols sym{static_cast<int>(iu), static_cast<int>(iv), static_cast<int>(ix),
                static_cast<int>(iy)};
    ++counts[flat_index(axes, sym)];
  }

  const auto plug_in = [&](const std::vector<std::int64_t>& c, long long total) {
    KahanSum d;
    for (std::size_t i = 0; i < c.size(); ++i)
      d.add(std::abs(static_cast<double>(c[i]) / static_cast<double>(total) - target.prob_flat(i)));
    return d.value();
  };

  EmpiricalL1 out;
  out.estimate = plug_in(counts, num_samples);

  // bootstrap over the empirical cell distribution
  std::vector<std::size_t> occupied;
  std::vector<double> cdf;
  double acc = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] > 0) {
      occupied.push_back(i);
      acc += static_cast<double>(counts[i]) / static_cast<double>(num_samples);
      cdf.push_back(acc);
    }
  }
  std::vector<double> l1s;
  std::vector<std::int64_t> re(counts.size());
  for (int b = 0; b < bootstrap; ++b) {
    std::fill(re.begin(), re.end(), 0);
    for (long long t = 0; t < num_samples; ++t) {
      const double u = rng.next_unit();
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      const std::size_t pos = std::min(occupied.size() - 1,
                                       static_cast<std::size_t>(it - cdf.begin()));
      ++re[occupied[pos]];
    }
    l1s.push_back(plug_in(re, num_samples));
  }
  double mean = 0.0;
  for (double v : l1s) mean += v;
  mean /= static_cast<double>(l1s.size());
  double var = 0.0;
  for (double v : l1s) var += (v - mean) * (v - mean);
  var /= std::max<std::size_t>(1, l1s.size() - 1);
  out.stderr_boot = std::sqrt(var);
  return out;
}

}  // namespace coordsim
