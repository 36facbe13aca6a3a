#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "coordsim/bounds.hpp"
#include "coordsim/factors.hpp"
#include "coordsim/joint.hpp"
#include "coordsim/rng.hpp"

namespace coordsim {

/// Two uniform random binnings of the W alphabet, phi1 -> K bins and
/// phi2 -> M bins. Each assignment is a pure function of (seed, symbol), so a
/// pair reconstructs bit-identically from (seed, sizes, rates).
struct BinningPair {
  std::vector<int> phi1;  // w -> bin in [0, bins_k)
  std::vector<int> phi2;  // w -> bin in [0, bins_m)
  int bins_k = 1;
  int bins_m = 1;
  double requested_r0 = 0.0;
  double requested_r = 0.0;
  std::uint64_t seed = 0;

  double realized_r0() const { return std::log2(static_cast<double>(bins_k)); }
  double realized_r() const { return std::log2(static_cast<double>(bins_m)); }
  RealizedRates realized() const { return {realized_r0(), realized_r()}; }
};

inline BinningPair draw_binning(int w_size, double r0, double r, std::uint64_t seed) {
  if (w_size < 1) throw shape_error("binning needs a nonempty alphabet");
  BinningPair b;
  b.requested_r0 = r0;
  b.requested_r = r;
  b.seed = seed;
  b.bins_k = bin_count_for_rate(r0);
  b.bins_m = bin_count_for_rate(r);
  b.phi1.resize(static_cast<std::size_t>(w_size));
  b.phi2.resize(static_cast<std::size_t>(w_size));
  for (int w = 0; w < w_size; ++w) {
    b.phi1[static_cast<std::size_t>(w)] = static_cast<int>(
        keyed_bounded(seed, 1, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(b.bins_k)));
    b.phi2[static_cast<std::size_t>(w)] = static_cast<int>(
        keyed_bounded(seed, 2, static_cast<std::uint64_t>(w), static_cast<std::uint64_t>(b.bins_m)));
  }
  return b;
}

/// Indicator-weighted joint P(a, b, k) = P(a, b) 1{phi(a) = k} for a single
/// binning of the named axis.
inline LabeledJoint rb_joint_generic(const LabeledJoint& p_ab, const std::string& binned_axis,
                                     const std::vector<int>& phi, const Alphabet& bin_axis) {
  const int apos = p_ab.axis_pos(binned_axis);
  if (apos < 0) throw shape_error("unknown axis '" + binned_axis + "'");
  if (phi.size() != static_cast<std::size_t>(p_ab.axes()[static_cast<std::size_t>(apos)].size))
    throw shape_error("binning map does not cover the axis");
  for (int k : phi)
    if (k < 0 || k >= bin_axis.size) throw shape_error("bin index out of range");

  const ChannelKernel k_of_a = [&] {
    const Alphabet a_ax = p_ab.axes()[static_cast<std::size_t>(apos)];
    std::vector<double> probs(static_cast<std::size_t>(a_ax.size) *
                                  static_cast<std::size_t>(bin_axis.size),
                              0.0);
    for (int a = 0; a < a_ax.size; ++a)
      probs[static_cast<std::size_t>(a) * static_cast<std::size_t>(bin_axis.size) +
            static_cast<std::size_t>(phi[static_cast<std::size_t>(a)])] = 1.0;
    return ChannelKernel({a_ax}, {bin_axis}, std::move(probs));
  }();
  return chain(p_ab, k_of_a);
}

/// Deterministic kernel out = f(in), symbols in canonical in-axis order.
inline ChannelKernel deterministic_kernel(std::vector<Alphabet> in_axes, Alphabet out_axis,
                                          const std::function<int(const Symbols&)>& f) {
  // sort a copy so f sees canonical order
  std::vector<Alphabet> sorted = in_axes;
  std::sort(sorted.begin(), sorted.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });
  const std::size_t oc = static_cast<std::size_t>(out_axis.size);
  std::vector<double> probs(cell_count(sorted) * oc, 0.0);
  Symbols sym(sorted.size(), 0);
  std::size_t row = 0;
  do {
    const int out = f(sym);
    if (out < 0 || out >= out_axis.size) throw shape_error("deterministic kernel output out of range");
    probs[row * oc + static_cast<std::size_t>(out)] = 1.0;
    ++row;
  } while (advance_symbols(sorted, sym));
  return ChannelKernel(std::move(sorted), {std::move(out_axis)}, std::move(probs));
}

/// Mismatch stochastic likelihood coder for a single binning:
/// T(a_hat | b, k) proportional to T_{A|B}(a_hat | b) 1{phi(a_hat) = k}.
/// Empty-bin slices have a vanishing denominator and fall back to the uniform
/// distribution, flagged.
inline ChannelKernel mismatch_slc(const LabeledJoint& t_ab, const std::string& a_axis,
                                  const std::string& b_axis, const std::vector<int>& phi,
                                  const Alphabet& bin_axis, const std::string& decoded_name) {
  const ChannelKernel a_given_b = condition(marginalize(t_ab, {a_axis, b_axis}), {b_axis});
  const int na = a_given_b.out_axes()[0].size;
  const int nb = a_given_b.in_axes()[0].size;
  if (phi.size() != static_cast<std::size_t>(na)) throw shape_error("binning map does not cover the axis");

  const Alphabet b_ax = a_given_b.in_axes()[0];
  const Alphabet out_ax{decoded_name, na};
  std::vector<Alphabet> in_axes{b_ax, bin_axis};
  std::vector<double> probs(static_cast<std::size_t>(nb) * static_cast<std::size_t>(bin_axis.size) *
                                static_cast<std::size_t>(na),
                            0.0);
  // layout before canonicalization: rows over (b, k), out a
  for (int b = 0; b < nb; ++b) {
    for (int k = 0; k < bin_axis.size; ++k) {
      const std::size_t row = (static_cast<std::size_t>(b) * static_cast<std::size_t>(bin_axis.size) +
                               static_cast<std::size_t>(k)) *
                              static_cast<std::size_t>(na);
      double denom = 0.0;
      for (int a = 0; a < na; ++a)
        if (phi[static_cast<std::size_t>(a)] == k) denom += a_given_b.prob_flat(static_cast<std::size_t>(b), static_cast<std::size_t>(a));
      if (denom > 0.0) {
        for (int a = 0; a < na; ++a)
          if (phi[static_cast<std::size_t>(a)] == k)
            probs[row + static_cast<std::size_t>(a)] =
                a_given_b.prob_flat(static_cast<std::size_t>(b), static_cast<std::size_t>(a)) / denom;
      }  // zero rows filled uniform by the kernel constructor
    }
  }
  return ChannelKernel(std::move(in_axes), {out_ax}, std::move(probs), 1e-12,
                       ZeroRowPolicy::uniform_fill);
}

/// Exact error probability of the single-binning mismatch SLC under P_AB:
/// the decoder sees (b, phi(a)) and samples a_hat; an error is a_hat != a.
inline double slc_error_probability(const LabeledJoint& p_ab, const std::string& a_axis,
                                    const std::string& b_axis, const ChannelKernel& slc,
                                    const std::vector<int>& phi) {
  const LabeledJoint j = marginalize(p_ab, {a_axis, b_axis});
  const int apos = j.axis_pos(a_axis), bpos = j.axis_pos(b_axis);
  KahanSum correct;
  Symbols sym(2, 0);
  do {
    const double v = j.prob(sym);
    if (v == 0.0) continue;
    const int a = sym[static_cast<std::size_t>(apos)];
    const int b = sym[static_cast<std::size_t>(bpos)];
    // slc in-axes are {b_axis, bin} in canonical order
    Symbols in(2, 0);
    const int slc_bpos = (slc.in_axes()[0].name == b_axis) ? 0 : 1;
    in[static_cast<std::size_t>(slc_bpos)] = b;
    in[static_cast<std::size_t>(1 - slc_bpos)] = phi[static_cast<std::size_t>(a)];
    correct.add(v * slc.prob(in, {a}));
  } while (advance_symbols(j.axes(), sym));
  return std::max(0.0, 1.0 - correct.value());
}

/// One-shot scheme: the target joint, its binnings, the fully materialized
/// binning-side and coding-side joints, the encoder posterior, and the
/// per-symbol decoder.
struct OneShotScheme {
  LabeledJoint target;          // over {U, V, W, X, Y}
  BinningPair binning;
  LabeledJoint rb_joint;        // over {K, M, U, V, W, Wh, X, Y}
  LabeledJoint rc_joint;        // same axes
  ChannelKernel encoder_posterior;  // W | K, M, U
  ChannelKernel slc;            // Wh | K, M, Y
  Alphabet k_axis, m_axis;
  std::size_t encoder_fill_count = 0;
  std::size_t slc_fill_count = 0;
};

inline constexpr const char* kDecodedAxis = "Wh";

/// Build the one-shot scheme from the target factors and a binning pair.
///
/// Binning side: P_U P_{W|U} P_{X|UW} P_{K|W} P_{M|W} P_{Y|X} P_{V|WY} T(Wh|YKM).
/// Coding side:  Q_K Q_M P_U P(W|KMU) P_{X|UW} P_{Y|X} T(Wh|YKM) P_{V|Wh Y}.
inline OneShotScheme build_one_shot(const TargetFactors& f, const BinningPair& binning) {
  validate_factor_axes(f);
  LabeledJoint target = target_joint(f);
  const int w_size = target.axes()[static_cast<std::size_t>(target.axis_pos("W"))].size;
  if (binning.phi1.size() != static_cast<std::size_t>(w_size))
    throw shape_error("binning does not cover the W alphabet");

  const Alphabet k_ax{"K", binning.bins_k};
  const Alphabet m_ax{"M", binning.bins_m};
  const Alphabet w_ax{"W", w_size};

  const ChannelKernel k_given_w = deterministic_kernel(
      {w_ax}, k_ax, [&](const Symbols& s) { return binning.phi1[static_cast<std::size_t>(s[0])]; });
  const ChannelKernel m_given_w = deterministic_kernel(
      {w_ax}, m_ax, [&](const Symbols& s) { return binning.phi2[static_cast<std::size_t>(s[0])]; });

  // combined-binning SLC on the W|Y posterior
  const ChannelKernel w_given_y = condition(marginalize(target, {"W", "Y"}), {"Y"});
  const Alphabet y_ax = w_given_y.in_axes()[0];
  const Alphabet wh_ax{kDecodedAxis, w_size};
  ChannelKernel slc = [&] {
    std::vector<Alphabet> in{y_ax, k_ax, m_ax};
    std::vector<double> probs(cell_count(in) * static_cast<std::size_t>(w_size), 0.0);
    // pre-canonical layout: rows over (y, k, m), out wh
    std::size_t row = 0;
    for (int y = 0; y < y_ax.size; ++y) {
      for (int k = 0; k < k_ax.size; ++k) {
        for (int m = 0; m < m_ax.size; ++m, ++row) {
          double denom = 0.0;
          for (int w = 0; w < w_size; ++w)
            if (binning.phi1[static_cast<std::size_t>(w)] == k &&
                binning.phi2[static_cast<std::size_t>(w)] == m)
              denom += w_given_y.prob_flat(static_cast<std::size_t>(y), static_cast<std::size_t>(w));
          if (denom > 0.0)
            for (int w = 0; w < w_size; ++w)
              if (binning.phi1[static_cast<std::size_t>(w)] == k &&
                  binning.phi2[static_cast<std::size_t>(w)] == m)
                probs[row * static_cast<std::size_t>(w_size) + static_cast<std::size_t>(w)] =
                    w_given_y.prob_flat(static_cast<std::size_t>(y), static_cast<std::size_t>(w)) / denom;
        }
      }
    }
    return ChannelKernel(std::move(in), {wh_ax}, std::move(probs), 1e-12,
                         ZeroRowPolicy::uniform_fill);
  }();

  // binning-side joint over {K, M, U, V, W, Wh, X, Y}
  LabeledJoint rb = chain(chain(chain(target, k_given_w), m_given_w), slc);

  // encoder posterior W | K, M, U extracted from the binning side
  const ChannelKernel encoder_posterior = condition(marginalize(rb, {"U", "W", "K", "M"}), {"K", "M", "U"});

  // coding-side joint
  LabeledJoint base = tensor_product(tensor_product(uniform_joint(k_ax), uniform_joint(m_ax)), f.p_u);
  LabeledJoint rc = chain(base, encoder_posterior);
  rc = chain(rc, f.x_given_uw);
  rc = chain(rc, f.y_given_x);
  rc = chain(rc, slc);
  const ChannelKernel v_given_why = rename_kernel_axis(f.v_given_wy, "W", kDecodedAxis);
  rc = chain(rc, v_given_why);

  OneShotScheme s{std::move(target), binning,          std::move(rb), std::move(rc),
                  encoder_posterior, std::move(slc),   k_ax,          m_ax};
  s.encoder_fill_count = s.encoder_posterior.uniform_fill_count();
  s.slc_fill_count = s.slc.uniform_fill_count();
  return s;
}

/// P(Wh != W) under any joint carrying both axes.
inline double decode_error_probability(const LabeledJoint& joint) {
  const LabeledJoint j = marginalize(joint, {"W", kDecodedAxis});
  KahanSum err;
  Symbols sym(2, 0);
  do {
    if (sym[0] != sym[1]) err.add(j.prob(sym));
  } while (advance_symbols(j.axes(), sym));
  return std::max(0.0, err.value());
}

}  // namespace coordsim
