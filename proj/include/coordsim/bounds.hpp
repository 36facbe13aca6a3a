#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coordsim/factors.hpp"
#include "coordsim/info.hpp"
#include "coordsim/joint.hpp"

namespace coordsim {

/// Standard normal tail Q(t) = P{N(0,1) > t}.
inline double q_function(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

/// Monotone-bracketing inverse of Q on (0, 1).
inline double q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("q_inverse needs p in (0,1)");
  double lo = -40.0, hi = 40.0;  // Q(lo) ~ 1, Q(hi) ~ 0
  for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (q_function(mid) > p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

enum class TailCmp { le, ge, lt, gt };

/// Exact i.i.d. sum tail plus the quantization slack that the value grid may
/// have introduced near the threshold.
struct TailResult {
  double prob = 0.0;
  double slack = 0.0;
};

struct ConvolveOptions {
  double delta = 0.0;             // value-grid step; 0 = adaptive (total n*delta <= 1e-9)
  std::size_t atom_cap = 2'000'000;
  bool force_generic = false;     // skip the closed-form two-atom path
};

namespace detail {

// Quantize-and-merge convolution of two sorted atom lists.
inline void convolve_atoms(const std::vector<double>& av, const std::vector<double>& ap,
                           const std::vector<double>& bv, const std::vector<double>& bp,
                           double delta, std::size_t atom_cap, std::vector<double>& out_v,
                           std::vector<double>& out_p) {
  std::map<std::int64_t, double> grid;
  for (std::size_t i = 0; i < av.size(); ++i) {
    for (std::size_t j = 0; j < bv.size(); ++j) {
      const double v = av[i] + bv[j];
      if (std::abs(v / delta) > 4e18)
        throw resource_error("sum values overflow the quantization grid; use a coarser delta");
      const auto cell = static_cast<std::int64_t>(std::llround(v / delta));
      grid[cell] += ap[i] * bp[j];
      if (grid.size() > atom_cap)
        throw resource_error("sum support exceeded " + std::to_string(atom_cap) +
                             " atoms; retry with a coarser quantization delta");
    }
  }
  out_v.clear();
  out_p.clear();
  out_v.reserve(grid.size());
  out_p.reserve(grid.size());
  for (const auto& [cell, q] : grid) {
    out_v.push_back(static_cast<double>(cell) * delta);
    out_p.push_back(q);
  }
}

inline double tail_from_atoms(const std::vector<double>& values, const std::vector<double>& probs,
                              double threshold, TailCmp cmp) {
  KahanSum s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const bool in = (cmp == TailCmp::le)   ? (v <= threshold)
                    : (cmp == TailCmp::ge) ? (v >= threshold)
                    : (cmp == TailCmp::lt) ? (v < threshold)
                                           : (v > threshold);
    if (in) s.add(probs[i]);
  }
  return std::min(1.0, std::max(0.0, s.value()));
}

// Binomial tail for a two-atom distribution: the sum is n*a + j*(b-a) with
// j ~ Bin(n, p_b). Terms are evaluated in log space so n up to ~10^7 works.
inline double two_atom_tail(double a, double b, double pb, long long n, double threshold,
                            TailCmp cmp) {
  const double d = b - a;
  const double x = (threshold - static_cast<double>(n) * a) / d;  // j-space threshold
  const double tie = 1e-9;  // j is integer; tolerate fp noise around integers
  long long j_lo = 0, j_hi = n;  // inclusive range of j in the tail
  switch (cmp) {
    case TailCmp::ge: j_lo = static_cast<long long>(std::ceil(x - tie)); break;
    case TailCmp::gt: j_lo = static_cast<long long>(std::floor(x + tie)) + 1; break;
    case TailCmp::le: j_hi = static_cast<long long>(std::floor(x + tie)); break;
    case TailCmp::lt: j_hi = static_cast<long long>(std::ceil(x - tie)) - 1; break;
  }
  if (cmp == TailCmp::ge || cmp == TailCmp::gt) {
    if (j_lo <= 0) return 1.0;
    if (j_lo > n) return 0.0;
  } else {
    if (j_hi >= n) return 1.0;
    if (j_hi < 0) return 0.0;
    j_lo = 0;
  }
  if (cmp == TailCmp::ge || cmp == TailCmp::gt) j_hi = n;

  const double log_pb = std::log(pb), log_qa = std::log1p(-pb);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  KahanSum s;
  for (long long j = j_lo; j <= j_hi; ++j) {
    const double lp = lg_n1 - std::lgamma(static_cast<double>(j) + 1.0) -
                      std::lgamma(static_cast<double>(n - j) + 1.0) +
                      static_cast<double>(j) * log_pb + static_cast<double>(n - j) * log_qa;
    s.add(std::exp(lp));
  }
  return std::min(1.0, std::max(0.0, s.value()));
}

}  // namespace detail

/// Exact Pr{ sum_{i=1..n} Z_i  (cmp)  threshold } for i.i.d. Z ~ v.
/// Two-atom supports use the closed binomial form; general supports use
/// repeated convolution on a value grid of step delta (adaptive by default),
/// reporting the total threshold perturbation n*delta as slack.
inline TailResult iid_sum_tail(const ValueDistribution& v, long long n, double threshold,
                               TailCmp cmp, const ConvolveOptions& opt = {}) {
  if (n < 1) throw shape_error("iid_sum_tail needs n >= 1");
  if (v.size() == 1 && !opt.force_generic) {
    const double total = static_cast<double>(n) * v.value(0);
    return {detail::tail_from_atoms({total}, {1.0}, threshold, cmp), 0.0};
  }
  if (v.size() == 2 && !opt.force_generic) {
    const double p = detail::two_atom_tail(v.value(0), v.value(1), v.prob(1), n, threshold, cmp);
    return {p, 0.0};
  }

  const double delta = opt.delta > 0.0 ? opt.delta : 1e-9 / static_cast<double>(n);
  // binary exponentiation over convolution powers
  std::vector<double> base_v = v.values(), base_p = v.probs();
  std::vector<double> acc_v, acc_p;
  std::vector<double> tmp_v, tmp_p;
  long long k = n;
  bool have_acc = false;
  while (k > 0) {
    if (k & 1) {
      if (!have_acc) {
        acc_v = base_v;
        acc_p = base_p;
        have_acc = true;
      } else {
        detail::convolve_atoms(acc_v, acc_p, base_v, base_p, delta, opt.atom_cap, tmp_v, tmp_p);
        acc_v.swap(tmp_v);
        acc_p.swap(tmp_p);
      }
    }
    k >>= 1;
    if (k > 0) {
      detail::convolve_atoms(base_v, base_p, base_v, base_p, delta, opt.atom_cap, tmp_v, tmp_p);
      base_v.swap(tmp_v);
      base_p.swap(tmp_p);
    }
  }
  return {detail::tail_from_atoms(acc_v, acc_p, threshold, cmp),
          static_cast<double>(n) * delta};
}

/// Realized per-symbol binning rates, log2 of the integer bin counts.
struct RealizedRates {
  double r0 = 0.0;
  double r = 0.0;
  double sum() const { return r0 + r; }
};

inline int bin_count_for_rate(double rate) {
  if (rate < 0.0) throw shape_error("rates must be nonnegative");
  if (rate > 30.0) throw resource_error("per-symbol rate " + std::to_string(rate) + " exceeds 30 bits");
  return std::max(1, static_cast<int>(std::ceil(std::exp2(rate) - 1e-9)));
}

// The complements of the threshold sets use non-strict comparisons; the sets
// themselves are strict as defined.

/// One epsilon bound split into its exact tail and additive 2-power parts,
/// with the convolution slack carried along.
struct EpsTerm {
  double value = 0.0;
  double tail = 0.0;
  double additive = 0.0;
  double slack = 0.0;
};

/// Uniformity-approximation bound: Pr{ sum h(W|U) <= n(R+R0) + g1 } + 2^{-(g1+1)/2}.
inline EpsTerm eps_app_term(const LabeledJoint& target_os, RealizedRates rr, long long n,
                            double gamma1, const ConvolveOptions& opt = {}) {
  if (gamma1 <= 0.0) throw shape_error("gamma1 must be positive");
  const auto v = pointwise_info_dist(target_os, {"W"}, {"U"});
  const auto t = iid_sum_tail(v, n, static_cast<double>(n) * rr.sum() + gamma1, TailCmp::le, opt);
  return {t.prob + std::exp2(-(gamma1 + 1.0) / 2.0), t.prob, std::exp2(-(gamma1 + 1.0) / 2.0),
          t.slack};
}

/// Decoder-error bound: Pr{ sum h(W|Y) >= n(R+R0) - g2 } + 2^{-g2}.
inline EpsTerm eps_dec_term(const LabeledJoint& target_os, RealizedRates rr, long long n,
                            double gamma2, const ConvolveOptions& opt = {}) {
  if (gamma2 <= 0.0) throw shape_error("gamma2 must be positive");
  const auto v = pointwise_info_dist(target_os, {"W"}, {"Y"});
  const auto t = iid_sum_tail(v, n, static_cast<double>(n) * rr.sum() - gamma2, TailCmp::ge, opt);
  return {t.prob + std::exp2(-gamma2), t.prob, std::exp2(-gamma2), t.slack};
}

/// Extra-randomness reduction bound: Pr{ sum h(W|UXYV) <= nR + g3 } + 2^{-(g3+1)/2}.
inline EpsTerm eps_app2_term(const LabeledJoint& target_os, RealizedRates rr, long long n,
                             double gamma3, const ConvolveOptions& opt = {}) {
  if (gamma3 <= 0.0) throw shape_error("gamma3 must be positive");
  const auto v = pointwise_info_dist(target_os, {"W"}, {"U", "X", "Y", "V"});
  const auto t = iid_sum_tail(v, n, static_cast<double>(n) * rr.r + gamma3, TailCmp::le, opt);
  return {t.prob + std::exp2(-(gamma3 + 1.0) / 2.0), t.prob, std::exp2(-(gamma3 + 1.0) / 2.0),
          t.slack};
}

inline double eps_app(const LabeledJoint& target_os, RealizedRates rr, long long n, double gamma1,
                      const ConvolveOptions& opt = {}) {
  return eps_app_term(target_os, rr, n, gamma1, opt).value;
}

inline double eps_dec(const LabeledJoint& target_os, RealizedRates rr, long long n, double gamma2,
                      const ConvolveOptions& opt = {}) {
  return eps_dec_term(target_os, rr, n, gamma2, opt).value;
}

inline double eps_app2(const LabeledJoint& target_os, RealizedRates rr, long long n, double gamma3,
                       const ConvolveOptions& opt = {}) {
  return eps_app2_term(target_os, rr, n, gamma3, opt).value;
}

inline double eps_tot(double eps_app2_v, double eps_app_v, double eps_dec_v) {
  return 2.0 * (eps_app2_v + eps_app_v + 5.0 * eps_dec_v);
}

/// Decay form of the end-to-end bound: 10*eps5 + (10 + 2*sqrt(2)) / sqrt(n).
inline double eps_tot_theoretical(double eps5, long long n) {
  if (eps5 < 0.0 || n < 1) throw shape_error("eps_tot_theoretical needs eps5 >= 0, n >= 1");
  return 10.0 * eps5 + (10.0 + 2.0 * std::sqrt(2.0)) / std::sqrt(static_cast<double>(n));
}

/// Input-averaged conditional-information variance of the W -> Y channel,
/// with the matching third-moment constant.
struct Dispersion {
  double variance = 0.0;   // bits^2
  double be_constant = 0.0;
  double mean = 0.0;       // equals H(W|Y)
  bool degenerate = false;
};

inline Dispersion channel_dispersion(const LabeledJoint& joint_wy,
                                     const std::string& w_axis = "W",
                                     const std::string& y_axis = "Y") {
  const LabeledJoint j = marginalize(joint_wy, {w_axis, y_axis});
  const LabeledJoint pw = marginalize(j, {w_axis});
  const LabeledJoint py = marginalize(j, {y_axis});
  const int wi = j.axis_pos(w_axis), yi = j.axis_pos(y_axis);
  const int nw = pw.axes()[0].size, ny = py.axes()[0].size;

  Dispersion d;
  KahanSum var_sum, third_sum, mean_sum;
  Symbols sym(2, 0);
  for (int w = 0; w < nw; ++w) {
    const double p_w = pw.prob_flat(static_cast<std::size_t>(w));
    if (p_w == 0.0) continue;
    // h(w|y) = -log2 P(w|y) under Y ~ P(y|w)
    KahanSum mu_k, m2_k;
    std::vector<double> hs(static_cast<std::size_t>(ny), 0.0), ps(static_cast<std::size_t>(ny), 0.0);
    for (int y = 0; y < ny; ++y) {
      sym[static_cast<std::size_t>(wi)] = w;
      sym[static_cast<std::size_t>(yi)] = y;
      const double p_wy = j.prob(sym);
      if (p_wy == 0.0) continue;
      const double p_y = py.prob_flat(static_cast<std::size_t>(y));
      const double h = std::log2(p_y) - std::log2(p_wy);  // -log2 P(w|y)
      const double py_w = p_wy / p_w;
      hs[static_cast<std::size_t>(y)] = h;
      ps[static_cast<std::size_t>(y)] = py_w;
      mu_k.add(py_w * h);
    }
    const double mu_w = mu_k.value();
    KahanSum v_k, t_k;
    for (int y = 0; y < ny; ++y) {
      const double q = ps[static_cast<std::size_t>(y)];
      if (q == 0.0) continue;
      const double dd = hs[static_cast<std::size_t>(y)] - mu_w;
      v_k.add(q * dd * dd);
      t_k.add(q * std::abs(dd) * dd * dd);
    }
    mean_sum.add(p_w * mu_w);
    var_sum.add(p_w * v_k.value());
    third_sum.add(p_w * t_k.value());
  }
  d.mean = mean_sum.value();
  d.variance = std::max(0.0, var_sum.value());
  const double third = std::max(0.0, third_sum.value());
  if (d.variance > 0.0) {
    d.be_constant = 6.0 * third / std::pow(d.variance, 1.5);
  } else {
    d.degenerate = true;
  }
  return d;
}

/// Optional grid search for the channel constant: minimize the input-averaged
/// variance over input distributions on W (compositions with step 1/grid).
inline double min_dispersion_over_input(const ChannelKernel& y_given_w, int grid = 64) {
  if (y_given_w.in_axes().size() != 1 || y_given_w.out_axes().size() != 1)
    throw shape_error("dispersion search expects a single-axis kernel");
  const int nw = y_given_w.in_axes()[0].size;
  std::vector<int> comp(static_cast<std::size_t>(nw), 0);
  comp[0] = grid;
  double best = std::numeric_limits<double>::infinity();
  const Alphabet w_ax = y_given_w.in_axes()[0];

  // enumerate compositions of `grid` into nw parts
  for (;;) {
    std::vector<double> pw(static_cast<std::size_t>(nw));
    bool any = false;
    for (int i = 0; i < nw; ++i) {
      pw[static_cast<std::size_t>(i)] = static_cast<double>(comp[static_cast<std::size_t>(i)]) / grid;
      any |= comp[static_cast<std::size_t>(i)] > 0;
    }
    if (any) {
      const LabeledJoint j = chain(LabeledJoint({w_ax}, pw), y_given_w);
      const Dispersion d = channel_dispersion(j, w_ax.name, y_given_w.out_axes()[0].name);
      best = std::min(best, d.variance);
    }
    // next composition
    int i = nw - 2;
    while (i >= 0 && comp[static_cast<std::size_t>(i)] == 0) --i;
    if (i < 0) break;
    // move one unit from slot i to slot i+1, resetting the tail
    const int rest = comp[static_cast<std::size_t>(nw - 1)];
    comp[static_cast<std::size_t>(i)] -= 1;
    comp[static_cast<std::size_t>(i + 1)] = rest + 1;
    if (i + 1 != nw - 1) comp[static_cast<std::size_t>(nw - 1)] = 0;
  }
  return best;
}

/// eps2 = eps1 (H(U,W) + H(U));  eps3 = eps1 (H(U,W,X,Y,V) + H(W)).
inline std::pair<double, double> typicality_constants(const LabeledJoint& target_os, double eps1) {
  if (eps1 < 0.0) throw shape_error("eps1 must be nonnegative");
  const double h_uw = entropy(target_os, {"U", "W"});
  const double h_u = entropy(target_os, {"U"});
  const double h_all = entropy(target_os, {"U", "W", "X", "Y", "V"});
  const double h_w = entropy(target_os, {"W"});
  return {eps1 * (h_uw + h_u), eps1 * (h_all + h_w)};
}

/// One normal-approximation comparison: exact tail of the standardized i.i.d.
/// sum at t versus Q(t), with the guaranteed envelope B_n / sqrt(n).
struct BerryEsseenCheck {
  double exact_tail = 0.0;   // Pr{ sum > n(mu + t sqrt(V/n)) }, strict
  double normal_tail = 0.0;  // Q(t)
  double diff = 0.0;
  double envelope = 0.0;     // B_n / sqrt(n)
  bool holds = false;
};

inline BerryEsseenCheck berry_esseen_check(const ValueDistribution& v, long long n, double t,
                                           const ConvolveOptions& opt = {}) {
  const TailStats s = tail_stats(v);
  if (s.degenerate) throw shape_error("berry_esseen_check needs a nondegenerate distribution");
  BerryEsseenCheck c;
  const double thr = static_cast<double>(n) * (s.mean + t * std::sqrt(s.variance / static_cast<double>(n)));
  c.exact_tail = iid_sum_tail(v, n, thr, TailCmp::gt, opt).prob;
  c.normal_tail = q_function(t);
  c.diff = std::abs(c.exact_tail - c.normal_tail);
  c.envelope = s.be_constant / std::sqrt(static_cast<double>(n));
  c.holds = c.diff <= c.envelope;
  return c;
}

/// Threshold offsets gamma1/gamma2/gamma3, in bits. Default (log2 n, log2(n)/2, log2 n).
struct GammaChoice {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma3 = 0.0;
};

inline GammaChoice default_gamma(long long n) {
  if (n < 2) throw shape_error("default gamma choice needs n >= 2; supply explicit gammas");
  const double l = std::log2(static_cast<double>(n));
  return {l, 0.5 * l, l};
}

/// All epsilon terms for one (n, rates, gammas, eps1, eps4/eps5) configuration.
struct EpsilonLedger {
  double eps1 = 0.0, eps2 = 0.0, eps3 = 0.0, eps4 = 0.0, eps5 = 0.0;
  double eps_app = 0.0, eps_dec = 0.0, eps_app2 = 0.0, eps_tot = 0.0;
  double tail_slack = 0.0;  // max convolution slack across the three tails
  std::vector<std::string> notes;
};

/// Report for a single rate-region query.
struct RegionReport {
  long long n = 0;
  double r = 0.0, r0 = 0.0;          // realized rates
  double i_wu = 0.0, i_wy = 0.0;     // I(W;U), I(W;Y)
  double i_wuxv_y = 0.0;             // I(W;UXV|Y)
  double v_disp = 0.0, b_n = 0.0;
  bool disp_degenerate = false;
  EpsilonLedger eps;
  double corr_info = 0.0;            // (g1+g2)/n + Qinv(eps4) sqrt(V/n)
  double corr_r0 = 0.0;              // (g2+g3)/n + Qinv(eps4) sqrt(V/n)
  bool feasible_info = false;        // I(W;U) < I(W;Y) + eps2 + corr_info
  double r0_min = 0.0;               // I(W;UXV|Y) + eps3 + corr_r0
  bool feasible_r0 = false;          // r0 > r0_min
  bool asymptotic_info = false;      // I(W;U) <= I(W;Y)
  bool asymptotic_r0 = false;        // r0 >= I(W;UXV|Y)
  bool has_rate_bounds = false;      // eps_app/dec/app2 columns populated
};

struct RegionQuery {
  long long n = 2;
  double eps1 = 0.01;
  std::optional<double> eps4;        // exactly one of eps4/eps5 set
  std::optional<double> eps5;
  double r0 = 0.0;
  std::optional<double> r;           // enables the eps_app/eps_dec/eps_app2 columns
  std::optional<GammaChoice> gamma;  // default derived from n
  ConvolveOptions conv;
};

inline bool asymptotic_info_ok(double i_wu, double i_wy) { return i_wu <= i_wy + 1e-12; }

/// Asymptotic inner-region membership: I(W;U) <= I(W;Y) and R0 >= I(W;UXV|Y).
struct AsymptoticCheck {
  bool info_ok = false;
  bool r0_ok = false;
  double i_wu = 0.0, i_wy = 0.0, i_wuxv_y = 0.0;
};

inline AsymptoticCheck asymptotic_region_point(const LabeledJoint& target_os, double r0) {
  AsymptoticCheck c;
  c.i_wu = mutual_information(target_os, {"W"}, {"U"});
  c.i_wy = mutual_information(target_os, {"W"}, {"Y"});
  c.i_wuxv_y = conditional_mutual_information(target_os, {"W"}, {"U", "X", "V"}, {"Y"});
  c.info_ok = asymptotic_info_ok(c.i_wu, c.i_wy);
  c.r0_ok = r0 >= c.i_wuxv_y - 1e-12;
  return c;
}

/// Evaluate every finite-n rate condition and epsilon term at one grid point.
inline RegionReport rate_region_point(const LabeledJoint& target_os, const RegionQuery& q) {
  if (q.n < 1) throw shape_error("region query needs n >= 1");
  if (q.eps4.has_value() == q.eps5.has_value())
    throw shape_error("supply exactly one of eps4 / eps5");

  RegionReport rep;
  rep.n = q.n;
  rep.r0 = q.r0;
  rep.r = q.r.value_or(0.0);
  rep.i_wu = mutual_information(target_os, {"W"}, {"U"});
  rep.i_wy = mutual_information(target_os, {"W"}, {"Y"});
  rep.i_wuxv_y = conditional_mutual_information(target_os, {"W"}, {"U", "X", "V"}, {"Y"});

  const Dispersion disp = channel_dispersion(target_os);
  rep.v_disp = disp.variance;
  rep.b_n = disp.be_constant;
  rep.disp_degenerate = disp.degenerate;

  const double sqrt_n = std::sqrt(static_cast<double>(q.n));
  const double be_term = disp.degenerate ? 0.0 : disp.be_constant / sqrt_n;
  rep.eps.eps1 = q.eps1;
  if (q.eps4) {
    rep.eps.eps4 = *q.eps4;
    rep.eps.eps5 = *q.eps4 - be_term;
  } else {
    rep.eps.eps5 = *q.eps5;
    rep.eps.eps4 = *q.eps5 + be_term;
  }
  if (!(rep.eps.eps4 > 0.0 && rep.eps.eps4 < 1.0))
    throw std::domain_error("eps4 must land in (0,1); got " + std::to_string(rep.eps.eps4));
  if (rep.eps.eps5 < 0.0)
    rep.eps.notes.push_back("eps5 negative: normal-approximation envelope exceeds eps4");

  const auto [e2, e3] = typicality_constants(target_os, q.eps1);
  rep.eps.eps2 = e2;
  rep.eps.eps3 = e3;

  const GammaChoice g = q.gamma ? *q.gamma : default_gamma(q.n);
  const double nf = static_cast<double>(q.n);
  double q_term = 0.0;
  if (!disp.degenerate) {
    q_term = q_inverse(rep.eps.eps4) * std::sqrt(disp.variance / nf);
  } else {
    rep.eps.notes.push_back("degenerate dispersion: dropped the Q^-1 term");
  }
  rep.corr_info = (g.gamma1 + g.gamma2) / nf + q_term;
  rep.corr_r0 = (g.gamma2 + g.gamma3) / nf + q_term;

  rep.feasible_info = rep.i_wu < rep.i_wy + rep.eps.eps2 + rep.corr_info;
  rep.r0_min = rep.i_wuxv_y + rep.eps.eps3 + rep.corr_r0;
  rep.feasible_r0 = rep.r0 > rep.r0_min;
  rep.asymptotic_info = asymptotic_info_ok(rep.i_wu, rep.i_wy);
  rep.asymptotic_r0 = rep.r0 >= rep.i_wuxv_y - 1e-12;

  if (q.r) {
    const RealizedRates rr{q.r0, *q.r};
    const auto a = eps_app_term(target_os, rr, q.n, g.gamma1, q.conv);
    const auto d = eps_dec_term(target_os, rr, q.n, g.gamma2, q.conv);
    const auto a2 = eps_app2_term(target_os, rr, q.n, g.gamma3, q.conv);
    rep.eps.eps_app = a.value;
    rep.eps.eps_dec = d.value;
    rep.eps.eps_app2 = a2.value;
    rep.eps.eps_tot = eps_tot(a2.value, a.value, d.value);
    rep.eps.tail_slack = std::max({a.slack, d.slack, a2.slack});
    rep.has_rate_bounds = true;
  }
  return rep;
}

inline std::vector<RegionReport> region_sweep(const LabeledJoint& target_os,
                                              const std::vector<RegionQuery>& grid) {
  std::vector<RegionReport> out;
  out.reserve(grid.size());
  for (const auto& q : grid) out.push_back(rate_region_point(target_os, q));
  return out;
}

/// Check that the five-factor chain marginalizes to the four-factor target
/// P_U P_{X|U} P_{Y|X} P_{V|UXY}. When no explicit four-factor form is given,
/// the conditionals are derived from the chained joint itself.
struct DecompositionCheck {
  bool valid = false;
  double residual = 0.0;
};

inline DecompositionCheck validate_decomposition(
    const TargetFactors& f, double tol = 1e-9,
    const std::optional<FourFactorTarget>& explicit_target = std::nullopt) {
  const LabeledJoint full = target_joint(f);
  const LabeledJoint marg = marginalize(full, {"U", "X", "Y", "V"});

  LabeledJoint four = [&] {
    if (explicit_target) {
      return chain(chain(chain(f.p_u, explicit_target->x_given_u), f.y_given_x),
                   explicit_target->v_given_uxy);
    }
    const ChannelKernel x_given_u = condition(marginalize(full, {"U", "X"}), {"U"});
    const ChannelKernel v_given_uxy = condition(marg, {"U", "X", "Y"});
    return chain(chain(chain(f.p_u, x_given_u), f.y_given_x), v_given_uxy);
  }();

  DecompositionCheck c;
  c.residual = l1_distance(marg, four);
  c.valid = c.residual <= tol;
  return c;
}

}  // namespace coordsim
