// Acceptance suite: one scenario per criterion, each printed as a single
// PASS/FAIL line with its runtime. Exit status is nonzero if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "coordsim/coordsim.hpp"
#include "helpers.hpp"

using namespace coordsim;
using namespace coordsim::testing;

namespace {

struct Stats {
  double mean = 0.0;
  double stderr_mean = 0.0;
};

Stats summarize(const std::vector<double>& xs) {
  Stats s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  if (xs.size() > 1) var /= static_cast<double>(xs.size() - 1);
  s.stderr_mean = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

// --- criterion 1: binning-side marginal identity ---------------------------

bool criterion_rb_identity(std::string& detail) {
  const auto f = desk_factors();
  const LabeledJoint target = target_joint(f);
  double worst = 0.0;
  for (int n : {1, 2}) {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
      const auto s = build_one_shot(f, draw_binning(2, 1.0, 1.0, seed));
      std::vector<LabeledJoint> syms(static_cast<std::size_t>(n),
                                     marginalize(s.rb_joint, {"U", "W", "X", "Y", "V"}));
      std::vector<const LabeledJoint*> ptr;
      for (auto& x : syms) ptr.push_back(&x);
      worst = std::max(worst,
                       l1_distance(product_sequence(ptr), product_power(target, n)));
    }
  }
  std::ostringstream os;
  os << "worst L1 = " << worst;
  detail = os.str();
  return worst <= 1e-12;
}

// --- criterion 2: uniformity and decodability bounds ------------------------

struct GenericInstance {
  LabeledJoint p_ab;
  int bins;
  double gamma;
};

bool check_osrb_bounds(const GenericInstance& gi, int seeds, std::string& why) {
  const double rate = std::log2(static_cast<double>(gi.bins));
  const Alphabet k_ax{"K", gi.bins};
  const int na = gi.p_ab.axes()[0].size;

  std::vector<double> uni, err;
  const auto ideal = tensor_product(marginalize(gi.p_ab, {"B"}), uniform_joint(k_ax));
  for (int s = 0; s < seeds; ++s) {
    const auto bp = draw_binning(na, rate, 0.0, static_cast<std::uint64_t>(s) + 1);
    const auto rb = rb_joint_generic(gi.p_ab, "A", bp.phi1, k_ax);
    uni.push_back(l1_distance(marginalize(rb, {"B", "K"}), ideal));
    const auto slc = mismatch_slc(gi.p_ab, "A", "B", bp.phi1, k_ax, "Ah");
    err.push_back(slc_error_probability(gi.p_ab, "A", "B", slc, bp.phi1));
  }
  const auto v_hab = pointwise_info_dist(gi.p_ab, {"A"}, {"B"});
  const double realized = std::log2(static_cast<double>(bin_count_for_rate(rate)));
  const double bound_app =
      iid_sum_tail(v_hab, 1, realized + gi.gamma, TailCmp::le).prob +
      std::exp2(-(gi.gamma + 1.0) / 2.0);
  const double bound_dec =
      iid_sum_tail(v_hab, 1, realized - gi.gamma, TailCmp::ge).prob + std::exp2(-gi.gamma);

  const Stats su = summarize(uni);
  const Stats se = summarize(err);
  if (su.mean > bound_app + 3.0 * su.stderr_mean) {
    std::ostringstream os;
    os << "uniformity " << su.mean << " > " << bound_app;
    why = os.str();
    return false;
  }
  if (se.mean > bound_dec + 3.0 * se.stderr_mean) {
    std::ostringstream os;
    os << "decode " << se.mean << " > " << bound_dec;
    why = os.str();
    return false;
  }
  return true;
}

bool criterion_osrb_bounds(std::string& detail) {
  const int seeds = 200;
  CounterRng rng(20240);
  int checked = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const int na = 4 + static_cast<int>(rng.next_bounded(7));    // 4..10
    const int nb = 2 + static_cast<int>(rng.next_bounded(2));    // 2..3
    const int bins = 2 + static_cast<int>(rng.next_bounded(4));  // 2..5
    const double gamma = 1.0 + rng.next_unit() * 1.5;
    GenericInstance gi{random_joint({{"A", na}, {"B", nb}}, rng), bins, gamma};
    std::string why;
    if (!check_osrb_bounds(gi, seeds, why)) {
      detail = "instance " + std::to_string(inst) + ": " + why;
      return false;
    }
    ++checked;
  }
  // desk instance, as a single source (A, B) = (W, U)
  const auto f = desk_factors();
  const auto p_uw = chain(f.p_u, f.w_given_u);
  GenericInstance desk{rename_axis(rename_axis(p_uw, "W", "A"), "U", "B"), 4, 1.5};
  std::string why;
  if (!check_osrb_bounds(desk, seeds, why)) {
    detail = "desk: " + why;
    return false;
  }
  detail = std::to_string(checked + 1) + " instances x " + std::to_string(seeds) + " seeds";
  return true;
}

// --- criterion 3: first bound and the derandomized chain --------------------

bool criterion_first_bound(std::string& detail) {
  const auto f = desk_factors();
  const LabeledJoint target = target_joint(f);
  const double g1 = 2.0, g2 = 1.0, g3 = 2.0;
  const int seeds = 200;

  std::ostringstream os;
  for (int n : {1, 2}) {
    std::vector<double> pre_action, full, minf;
    RealizedRates rr{};
    for (int sd = 0; sd < seeds; ++sd) {
      const auto bp = draw_binning(2, 1.0, 1.0, static_cast<std::uint64_t>(sd) + 1);
      rr = bp.realized();
      const FixedLengthScheme s{build_one_shot(f, bp), n};
      std::vector<LabeledJoint> rbs(static_cast<std::size_t>(n), s.one_shot.rb_joint);
      std::vector<LabeledJoint> rcs(static_cast<std::size_t>(n), s.one_shot.rc_joint);
      std::vector<const LabeledJoint*> rbp, rcp;
      for (auto& x : rbs) rbp.push_back(&x);
      for (auto& x : rcs) rcp.push_back(&x);
      full.push_back(l1_distance(product_sequence(rbp), product_sequence(rcp)));

      // everything but the action V: decoded symbols included
      const std::vector<std::string> pre{"K", "M", "U", "W", "Wh", "X", "Y"};
      std::vector<LabeledJoint> rbs2(static_cast<std::size_t>(n),
                                     marginalize(s.one_shot.rb_joint, pre));
      std::vector<LabeledJoint> rcs2(static_cast<std::size_t>(n),
                                     marginalize(s.one_shot.rc_joint, pre));
      std::vector<const LabeledJoint*> rbp2, rcp2;
      for (auto& x : rbs2) rbp2.push_back(&x);
      for (auto& x : rcs2) rcp2.push_back(&x);
      pre_action.push_back(l1_distance(product_sequence(rbp2), product_sequence(rcp2)));

      minf.push_back(select_f(s, FStrategy::exhaustive, FMetric::to_rb).bound);
    }
    const double e_app = eps_app(target, rr, n, g1);
    const double e_dec = eps_dec(target, rr, n, g2);
    const double e_app2 = eps_app2(target, rr, n, g3);
    const double bound_pre = e_app + e_dec;
    const double bound_first = e_app + 5.0 * e_dec;
    const double bound_tot = eps_tot(e_app2, e_app, e_dec);
    const Stats sp = summarize(pre_action);
    const Stats sf = summarize(full);
    const Stats sm = summarize(minf);
    os << "n=" << n << ": pre " << sp.mean << " <= " << bound_pre << ", full " << sf.mean
       << " <= " << bound_first << ", minf " << sm.mean << " <= " << bound_tot << "; ";
    if (sp.mean > bound_pre + 3.0 * sp.stderr_mean) {
      detail = os.str() + "pre-action bound violated";
      return false;
    }
    if (sf.mean > bound_first + 3.0 * sf.stderr_mean) {
      detail = os.str() + "first bound violated";
      return false;
    }
    if (sm.mean > bound_tot + 3.0 * sm.stderr_mean) {
      detail = os.str() + "eps_tot bound violated";
      return false;
    }
  }
  detail = os.str();
  return true;
}

// --- criterion 4: Berry-Esseen envelope -------------------------------------

bool criterion_berry_esseen(std::string& detail) {
  const auto f = desk_factors();
  const auto v = pointwise_info_dist(target_joint(f), {"W"}, {"Y"});
  int violations = 0;
  double worst_ratio = 0.0;
  for (int n : {10, 50, 200, 1000}) {
    for (double t : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
      const auto c = berry_esseen_check(v, n, t);
      worst_ratio = std::max(worst_ratio, c.diff / c.envelope);
      if (!c.holds) ++violations;
    }
  }
  std::ostringstream os;
  os << "20 grid points, worst diff/envelope = " << worst_ratio;
  detail = os.str();
  return violations == 0;
}

// --- criterion 5: asymptotic recovery ---------------------------------------

bool criterion_asymptotic(std::string& detail) {
  const LabeledJoint target = target_joint(desk_factors());
  RegionQuery q;
  q.eps1 = 0.01;
  q.eps4 = 0.05;
  q.r0 = 1.0;

  double corr[3];
  const long long ns[3] = {100, 10000, 1000000};
  for (int i = 0; i < 3; ++i) {
    q.n = ns[i];
    corr[i] = rate_region_point(target, q).corr_r0;
  }
  std::ostringstream os;
  os << "corr = " << corr[0] << " > " << corr[1] << " > " << corr[2];
  detail = os.str();
  if (!(corr[0] > corr[1] && corr[1] > corr[2])) return false;
  if (!(corr[2] < 0.02)) return false;

  // with eps1 -> 0 and n large the finite-n checks coincide with the
  // asymptotic inner-region checks on both sides of the R0 boundary
  const auto asym = asymptotic_region_point(target, 0.0);
  RegionQuery ql;
  ql.eps1 = 1e-12;
  ql.eps4 = 0.05;
  ql.n = 1000000000000LL;
  for (double delta : {0.01, -0.01}) {
    ql.r0 = asym.i_wuxv_y + delta;
    const auto rep = rate_region_point(target, ql);
    const auto ac = asymptotic_region_point(target, ql.r0);
    if (rep.feasible_info != ac.info_ok) return false;
    if (rep.feasible_r0 != ac.r0_ok) return false;
    if (std::abs(rep.r0_min - ac.i_wuxv_y) > 1e-4) return false;
  }
  return true;
}

// --- criterion 6: eps_tot decay rate ----------------------------------------

bool criterion_decay(std::string& detail) {
  const double target_const = 10.0 + 2.0 * std::sqrt(2.0);
  double worst = 0.0;
  for (long long n : {100LL, 10000LL, 1000000LL}) {
    const double v = eps_tot_theoretical(0.0, n) * std::sqrt(static_cast<double>(n));
    worst = std::max(worst, std::abs(v - target_const));
  }
  std::ostringstream os;
  os << "max |eps_tot*sqrt(n) - (10+2sqrt2)| = " << worst;
  detail = os.str();
  return worst <= 1e-9;
}

// --- criterion 7: numeric kernels -------------------------------------------

bool criterion_numeric(std::string& detail) {
  // Q / Q^{-1} round trip across the requested range
  for (double p = 1e-6; p <= 0.5; p *= 1.8) {
    if (std::abs(q_function(q_inverse(p)) - p) > 1e-8) {
      detail = "round trip failed at p = " + std::to_string(p);
      return false;
    }
  }
  if (std::abs(q_function(q_inverse(0.5)) - 0.5) > 1e-8) {
    detail = "round trip failed at p = 0.5";
    return false;
  }

  // dispersion of the BSC(0.11) against the closed form
  const auto j = chain(LabeledJoint({{"W", 2}}, {0.5, 0.5}),
                       ChannelKernel({{"W", 2}}, {{"Y", 2}}, {0.89, 0.11, 0.11, 0.89}));
  const double gap = std::log2(0.89 / 0.11);
  if (std::abs(channel_dispersion(j).variance - 0.11 * 0.89 * gap * gap) > 1e-10) {
    detail = "dispersion mismatch";
    return false;
  }

  // exact tails against a 10^7-sample Monte Carlo oracle at n = 20
  CounterRng rng(555);
  const int n = 20;
  const long long samples = 10000000;
  double worst_sigmas = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const int atoms = 3 + static_cast<int>(rng.next_bounded(3));
    std::vector<std::pair<double, double>> a;
    double sum = 0.0;
    for (int i = 0; i < atoms; ++i) {
      a.push_back({rng.next_unit() * 4.0 - 1.0, 0.05 + rng.next_unit()});
      sum += a.back().second;
    }
    for (auto& [value, p] : a) p /= sum;
    const ValueDistribution v(std::move(a));
    const auto st = tail_stats(v);
    const double thr = n * st.mean + 0.8 * std::sqrt(n * st.variance);
    const double exact = iid_sum_tail(v, n, thr, TailCmp::ge).prob;

    long long hits = 0;
    CounterRng mc(9000 + static_cast<std::uint64_t>(inst));
    for (long long s = 0; s < samples; ++s) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += v.sample(mc);
      hits += acc >= thr ? 1 : 0;
    }
    const double freq = static_cast<double>(hits) / static_cast<double>(samples);
    const double se = std::sqrt(std::max(exact * (1.0 - exact), 1e-12) /
                                static_cast<double>(samples));
    worst_sigmas = std::max(worst_sigmas, std::abs(freq - exact) / se);
    if (std::abs(freq - exact) > 3.0 * se) {
      std::ostringstream os;
      os << "instance " << inst << ": |" << freq << " - " << exact << "| > 3se (" << se << ")";
      detail = os.str();
      return false;
    }
  }
  std::ostringstream os;
  os << "10 exact tails vs 1e7-sample oracle, worst gap = " << worst_sigmas << " sigma";
  detail = os.str();
  return true;
}

// --- criterion 8: L1 distance properties and the coupling bound --------------------

bool criterion_distance_properties(std::string& detail) {
  CounterRng rng(777);
  const int trials = 1000;

  for (int t = 0; t < trials; ++t) {
    const auto p = random_joint({{"A", 3}, {"B", 3}}, rng);
    const auto q = random_joint({{"A", 3}, {"B", 3}}, rng);
    if (l1_distance(marginalize(p, {"A"}), marginalize(q, {"A"})) >
        l1_distance(p, q) + 1e-12) {
      detail = "marginal monotonicity failed at trial " + std::to_string(t);
      return false;
    }
  }

  for (int t = 0; t < trials; ++t) {
    const auto pa = random_joint({{"A", 3}}, rng);
    const auto qa = random_joint({{"A", 3}}, rng);
    const auto k = random_kernel({{"A", 3}}, {{"B", 3}}, rng);
    if (std::abs(l1_distance(chain(pa, k), chain(qa, k)) - l1_distance(pa, qa)) > 1e-10) {
      detail = "shared-kernel invariance failed at trial " + std::to_string(t);
      return false;
    }
  }

  for (int t = 0; t < trials; ++t) {
    const auto pa = random_joint({{"A", 3}}, rng);
    const auto qa = random_joint({{"A", 3}}, rng);
    const auto k1 = random_kernel({{"A", 3}}, {{"B", 3}}, rng);
    const auto k2 = random_kernel({{"A", 3}}, {{"B", 3}}, rng);
    const double eps = l1_distance(chain(pa, k1), chain(qa, k2));
    // exhaustive witness search over the conditioning symbol
    double best = 4.0;
    for (int a = 0; a < 3; ++a) {
      double row = 0.0;
      for (int b = 0; b < 3; ++b) row += std::abs(k1.prob({a}, {b}) - k2.prob({a}, {b}));
      best = std::min(best, row);
    }
    if (best > 2.0 * eps + 1e-12) {
      detail = "conditional witness failed at trial " + std::to_string(t);
      return false;
    }
  }

  for (int t = 0; t < trials; ++t) {
    const auto coupling = random_joint({{"A", 4}, {"A2", 4}}, rng);
    const auto pa = marginalize(coupling, {"A"});
    const auto pa2 = rename_axis(marginalize(coupling, {"A2"}), "A2", "A");
    double disagree = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int a2 = 0; a2 < 4; ++a2)
        if (a != a2) disagree += coupling.prob({a, a2});
    if (l1_distance(pa, pa2) > 4.0 * disagree + 1e-12) {
      detail = "coupling bound failed at trial " + std::to_string(t);
      return false;
    }
  }

  detail = std::to_string(trials) + " randomized instances per property";
  return true;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const std::vector<Criterion> criteria = {
      {"binning-side marginal identity", criterion_rb_identity},
      {"uniformity and decodability bounds", criterion_osrb_bounds},
      {"first bound and derandomized chain", criterion_first_bound},
      {"normal-approximation envelope", criterion_berry_esseen},
      {"asymptotic recovery", criterion_asymptotic},
      {"total-bound decay rate", criterion_decay},
      {"numeric kernels", criterion_numeric},
      {"distance properties and coupling", criterion_distance_properties},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = criteria[i].fn(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %zu: %s (%.2fs) %s\n", ok ? "PASS" : "FAIL", i + 1,
                criteria[i].name, secs, detail.c_str());
    failures += ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
