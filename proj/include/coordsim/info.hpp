#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "coordsim/joint.hpp"

namespace coordsim {

/// -log2 P(x); +inf on zero mass.
inline double self_information(const LabeledJoint& p, const Symbols& x) {
  const double v = p.prob(x);
  return v > 0.0 ? -std::log2(v) : std::numeric_limits<double>::infinity();
}

/// -log2 K(out | in).
inline double conditional_information(const ChannelKernel& k, const Symbols& out,
                                      const Symbols& in) {
  const double v = k.prob(in, out);
  return v > 0.0 ? -std::log2(v) : std::numeric_limits<double>::infinity();
}

/// Shannon entropy of the marginal over `axes`, in bits.
inline double entropy(const LabeledJoint& p, const std::vector<std::string>& axes) {
  const LabeledJoint m = (axes.size() == p.axes().size()) ? p : marginalize(p, axes);
  KahanSum h;
  for (std::size_t i = 0; i < m.cells(); ++i) {
    const double v = m.prob_flat(i);
    if (v > 0.0) h.add(-v * std::log2(v));
  }
  return std::max(0.0, h.value());
}

inline double entropy(const LabeledJoint& p) {
  std::vector<std::string> all;
  for (const auto& a : p.axes()) all.push_back(a.name);
  return entropy(p, all);
}

namespace detail {
inline std::vector<std::string> axis_union(const std::vector<std::string>& a,
                                           const std::vector<std::string>& b) {
  std::vector<std::string> u = a;
  for (const auto& name : b)
    if (std::find(u.begin(), u.end(), name) == u.end()) u.push_back(name);
  return u;
}

inline double clamp_information(double v) {
  if (v < -1e-10) throw shape_error("information quantity below numerical slack");
  return std::max(0.0, v);
}
}  // namespace detail

inline double conditional_entropy(const LabeledJoint& p, const std::vector<std::string>& target,
                                  const std::vector<std::string>& given) {
  if (given.empty()) return entropy(p, target);
  return detail::clamp_information(entropy(p, detail::axis_union(target, given)) -
                                   entropy(p, given));
}

inline double mutual_information(const LabeledJoint& p, const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  return detail::clamp_information(entropy(p, a) + entropy(p, b) -
                                   entropy(p, detail::axis_union(a, b)));
}

/// I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C).
inline double conditional_mutual_information(const LabeledJoint& p,
                                             const std::vector<std::string>& a,
                                             const std::vector<std::string>& b,
                                             const std::vector<std::string>& c) {
  if (c.empty()) return mutual_information(p, a, b);
  return detail::clamp_information(
      entropy(p, detail::axis_union(a, c)) + entropy(p, detail::axis_union(b, c)) -
      entropy(p, detail::axis_union(detail::axis_union(a, b), c)) - entropy(p, c));
}

/// log2 [ P(a,b) / (P(a) P(b)) ] where the two groups partition P's axes.
inline double information_density(const LabeledJoint& p, const std::vector<std::string>& a_axes,
                                  const Symbols& a, const std::vector<std::string>& b_axes,
                                  const Symbols& b) {
  const auto all = detail::axis_union(a_axes, b_axes);
  const LabeledJoint joint = (all.size() == p.axes().size()) ? p : marginalize(p, all);
  const LabeledJoint pa = marginalize(joint, a_axes);
  const LabeledJoint pb = marginalize(joint, b_axes);
  const double ma = pa.prob(a), mb = pb.prob(b);
  if (ma == 0.0 || mb == 0.0)
    throw shape_error("information density undefined on a zero marginal");
  // symbols arrive in the canonical order of each marginal
  Symbols full(joint.axes().size());
  for (std::size_t i = 0; i < pa.axes().size(); ++i)
    full[static_cast<std::size_t>(joint.axis_pos(pa.axes()[i].name))] = a[i];
  for (std::size_t i = 0; i < pb.axes().size(); ++i)
    full[static_cast<std::size_t>(joint.axis_pos(pb.axes()[i].name))] = b[i];
  const double j = joint.prob(full);
  if (j == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log2(j / (ma * mb));
}

/// Entropy-typicality in multiplicative form:
/// 2^{-nH(1+eps1)} <= P^{(x)n}(seq) <= 2^{-nH(1-eps1)}.
/// `seq` holds one canonical symbol tuple per position.
inline bool is_typical(const LabeledJoint& p, const std::vector<Symbols>& seq, double eps1) {
  if (eps1 <= 0.0) throw shape_error("typicality needs eps1 > 0");
  const double h = entropy(p);
  const double n = static_cast<double>(seq.size());
  KahanSum neg_log;
  for (const auto& x : seq) {
    const double v = p.prob(x);
    if (v == 0.0) return false;
    neg_log.add(-std::log2(v));
  }
  const double t = neg_log.value();
  return t >= n * h * (1.0 - eps1) && t <= n * h * (1.0 + eps1);
}

/// Finitely supported real random variable; atoms sorted by value, numerically
/// identical values merged. Carrier for pointwise-information distributions.
class ValueDistribution {
 public:
  explicit ValueDistribution(std::vector<std::pair<double, double>> atoms,
                             double merge_tol = 1e-12) {
    std::erase_if(atoms, [](const auto& a) { return a.second == 0.0; });
    if (atoms.empty()) throw shape_error("value distribution needs at least one atom");
    for (const auto& [v, q] : atoms) {
      if (!std::isfinite(v)) throw shape_error("value distribution atom not finite");
      if (q < 0.0) throw shape_error("negative atom probability");
    }
    std::sort(atoms.begin(), atoms.end());
    KahanSum total;
    for (const auto& [v, q] : atoms) total.add(q);
    const double s = total.value();
    if (std::abs(s - 1.0) > 1e-12)
      throw shape_error("atom probabilities sum to " + std::to_string(s));

    for (const auto& [v, q] : atoms) {
      if (!values_.empty() && v - values_.back() <= merge_tol) {
        // weighted merge keeps the mean exact
        const double w = probs_.back() + q;
        values_.back() = (values_.back() * probs_.back() + v * q) / w;
        probs_.back() = w;
      } else {
        values_.push_back(v);
        probs_.push_back(q);
      }
    }
    if (s != 1.0)
      for (auto& q : probs_) q /= s;
  }

  std::size_t size() const { return values_.size(); }
  double value(std::size_t i) const { return values_[i]; }
  double prob(std::size_t i) const { return probs_[i]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }

  double mean() const {
    KahanSum s;
    for (std::size_t i = 0; i < size(); ++i) s.add(values_[i] * probs_[i]);
    return s.value();
  }

  double sample(CounterRng& rng) const {
    const double u = rng.next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      acc += probs_[i];
      if (u < acc) return values_[i];
    }
    return values_.back();
  }

 private:
  std::vector<double> values_;
  std::vector<double> probs_;
};

/// Moments that control the normal approximation of an i.i.d. sum.
struct TailStats {
  double mean = 0.0;
  double variance = 0.0;        // bits^2
  double third_abs_moment = 0.0;  // bits^3
  double be_constant = 0.0;     // 6 * T / V^(3/2)
  bool degenerate = false;      // variance == 0
};

inline TailStats tail_stats(const ValueDistribution& v) {
  TailStats t;
  t.mean = v.mean();
  KahanSum var, third;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v.value(i) - t.mean;
    var.add(v.prob(i) * d * d);
    third.add(v.prob(i) * std::abs(d) * d * d);
  }
  t.variance = std::max(0.0, var.value());
  t.third_abs_moment = std::max(0.0, third.value());
  if (t.variance > 0.0) {
    t.be_constant = 6.0 * t.third_abs_moment / std::pow(t.variance, 1.5);
  } else {
    t.degenerate = true;
  }
  return t;
}

/// Distribution of the pointwise conditional information -log2 P(target|given)
/// under P. Zero-probability cells never occur, so they are excluded and the
/// support stays finite.
inline ValueDistribution pointwise_info_dist(const LabeledJoint& p,
                                             const std::vector<std::string>& target,
                                             const std::vector<std::string>& given,
                                             double merge_tol = 1e-12) {
  const auto all = detail::axis_union(target, given);
  const LabeledJoint joint = (all.size() == p.axes().size()) ? p : marginalize(p, all);
  std::vector<std::pair<double, double>> atoms;
  if (given.empty()) {
    for (std::size_t i = 0; i < joint.cells(); ++i) {
      const double v = joint.prob_flat(i);
      if (v > 0.0) atoms.emplace_back(-std::log2(v), v);
    }
    return ValueDistribution(std::move(atoms), merge_tol);
  }
  const LabeledJoint marg = marginalize(joint, given);
  std::vector<int> given_pos;
  for (const auto& a : marg.axes()) given_pos.push_back(joint.axis_pos(a.name));
  Symbols sym(joint.axes().size(), 0);
  Symbols gsym(marg.axes().size(), 0);
  std::size_t src = 0;
  do {
    const double v = joint.prob_flat(src);
    if (v > 0.0) {
      for (std::size_t i = 0; i < gsym.size(); ++i)
        gsym[i] = sym[static_cast<std::size_t>(given_pos[i])];
      const double m = marg.prob(gsym);
      atoms.emplace_back(std::log2(m) - std::log2(v), v);  // -log2(v/m)
    }
    ++src;
  } while (advance_symbols(joint.axes(), sym));
  return ValueDistribution(std::move(atoms), merge_tol);
}

/// Distribution of the information density log2 P(a,b)/(P(a)P(b)) under P.
inline ValueDistribution info_density_dist(const LabeledJoint& p,
                                           const std::vector<std::string>& a_axes,
                                           const std::vector<std::string>& b_axes,
                                           double merge_tol = 1e-12) {
  const auto all = detail::axis_union(a_axes, b_axes);
  const LabeledJoint joint = (all.size() == p.axes().size()) ? p : marginalize(p, all);
  const LabeledJoint pa = marginalize(joint, a_axes);
  const LabeledJoint pb = marginalize(joint, b_axes);
  std::vector<int> a_pos, b_pos;
  for (const auto& ax : pa.axes()) a_pos.push_back(joint.axis_pos(ax.name));
  for (const auto& ax : pb.axes()) b_pos.push_back(joint.axis_pos(ax.name));

  std::vector<std::pair<double, double>> atoms;
  Symbols sym(joint.axes().size(), 0);
  Symbols asym(pa.axes().size(), 0), bsym(pb.axes().size(), 0);
  std::size_t src = 0;
  do {
    const double v = joint.prob_flat(src);
    if (v > 0.0) {
      for (std::size_t i = 0; i < asym.size(); ++i) asym[i] = sym[static_cast<std::size_t>(a_pos[i])];
      for (std::size_t i = 0; i < bsym.size(); ++i) bsym[i] = sym[static_cast<std::size_t>(b_pos[i])];
      atoms.emplace_back(std::log2(v) - std::log2(pa.prob(asym)) - std::log2(pb.prob(bsym)), v);
    }
    ++src;
  } while (advance_symbols(joint.axes(), sym));
  return ValueDistribution(std::move(atoms), merge_tol);
}

/// Named per-symbol functionals used by the tail analyses.
enum class SymbolFunctional {
  cond_info_w_given_u,
  cond_info_w_given_y,
  cond_info_w_given_uxyv,
  info_density_w_y,
};

inline ValueDistribution per_symbol_value_distribution(const LabeledJoint& target_os,
                                                       SymbolFunctional f) {
  switch (f) {
    case SymbolFunctional::cond_info_w_given_u:
      return pointwise_info_dist(target_os, {"W"}, {"U"});
    case SymbolFunctional::cond_info_w_given_y:
      return pointwise_info_dist(target_os, {"W"}, {"Y"});
    case SymbolFunctional::cond_info_w_given_uxyv:
      return pointwise_info_dist(target_os, {"W"}, {"U", "X", "Y", "V"});
    case SymbolFunctional::info_density_w_y:
      return info_density_dist(target_os, {"W"}, {"Y"});
  }
  throw shape_error("unknown per-symbol functional");
}

}  // namespace coordsim
