#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordsim/binning.hpp"
#include "coordsim/bounds.hpp"
#include "coordsim/factors.hpp"
#include "coordsim/sim.hpp"

namespace coordsim {

inline constexpr const char* kToolVersion = "coordctl 0.1.0";

/// Bad or inconsistent experiment configuration (exit code 2).
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { exact, montecarlo, bounds, region, validate };

struct SeedSpec {
  std::uint64_t base = 1;
  int count = 50;
};

struct ExperimentConfig {
  std::map<std::string, int> alphabet_sizes;
  std::optional<TargetFactors> factors;
  std::optional<FourFactorTarget> four_factor;  // optional validate cross-check
  long long n = 1;
  double r0 = 1.0;
  double r = 1.0;
  std::optional<GammaChoice> gamma;  // unset: (log2 n, log2(n)/2, log2 n)
  double eps1 = 0.01;
  std::optional<double> eps4;
  std::optional<double> eps5;
  SeedSpec seeds;
  RunMode mode = RunMode::validate;
  std::string out_dir = "runs";
  std::vector<long long> n_list;     // region grid; defaults to {n}
  long long samples = 100000;        // montecarlo episodes
  std::string f_strategy = "uniform";  // uniform | exhaustive | greedy | sampled
  std::optional<std::vector<int>> fixed_f;
  long long episode_log_limit = 100000;
  bool dump_joints = false;  // exact mode: write the induced joint for the base seed
  std::uint64_t config_hash = 0;
};

namespace detail {

inline std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex16(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline const nlohmann::json& field(const nlohmann::json& j, const std::string& name) {
  if (!j.contains(name)) throw config_error("missing config field '" + name + "'");
  return j.at(name);
}

inline double num_field(const nlohmann::json& j, const std::string& name) {
  const auto& f = field(j, name);
  if (!f.is_number()) throw config_error("config field '" + name + "' must be a number");
  return f.get<double>();
}

inline std::vector<double> dist_row(const nlohmann::json& row, const std::string& name,
                                    int expect) {
  if (!row.is_array() || static_cast<int>(row.size()) != expect)
    throw config_error("config field '" + name + "' must be an array of " +
                       std::to_string(expect) + " probabilities");
  std::vector<double> v;
  for (const auto& x : row) {
    if (!x.is_number()) throw config_error("config field '" + name + "' has a non-numeric entry");
    v.push_back(x.get<double>());
  }
  return v;
}

// Nested-array kernel: dims lists the in-axis sizes in the order the field
// name spells them; the innermost arrays are distributions over the out axis.
inline std::vector<double> kernel_rows(const nlohmann::json& node, const std::string& name,
                                       const std::vector<int>& dims, int out_size,
                                       double row_tol) {
  std::vector<double> flat;
  std::vector<const nlohmann::json*> stack{&node};
  // depth-first in index order keeps the row-major layout
  const std::function<void(const nlohmann::json&, std::size_t, std::string)> walk =
      [&](const nlohmann::json& cur, std::size_t depth, std::string path) {
        if (depth == dims.size()) {
          const auto row = dist_row(cur, name + path, out_size);
          double sum = 0.0;
          for (double x : row) sum += x;
          if (std::abs(sum - 1.0) > row_tol)
            throw config_error("config field '" + name + path + "' row sums to " + fmt12(sum));
          flat.insert(flat.end(), row.begin(), row.end());
          return;
        }
        if (!cur.is_array() || static_cast<int>(cur.size()) != dims[depth])
          throw config_error("config field '" + name + path + "' must be an array of length " +
                             std::to_string(dims[depth]));
        for (int i = 0; i < dims[depth]; ++i)
          walk(cur.at(static_cast<std::size_t>(i)), depth + 1, path + "[" + std::to_string(i) + "]");
      };
  walk(node, 0, "");
  return flat;
}

}  // namespace detail

inline RunMode parse_mode(const std::string& mode) {
  if (mode == "exact") return RunMode::exact;
  if (mode == "montecarlo") return RunMode::montecarlo;
  if (mode == "bounds") return RunMode::bounds;
  if (mode == "region") return RunMode::region;
  if (mode == "validate") return RunMode::validate;
  throw config_error("unknown mode '" + mode + "'");
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig c;
  c.mode = parse_mode(detail::field(j, "mode").get<std::string>());

  const auto& alpha = detail::field(j, "alphabets");
  for (const char* name : {"U", "W", "X", "Y", "V"}) {
    if (!alpha.contains(name))
      throw config_error(std::string("alphabets must include '") + name + "'");
    const int size = alpha.at(name).get<int>();
    if (size < 1) throw config_error(std::string("alphabet '") + name + "' must be positive");
    if (size > 16) throw config_error(std::string("alphabet '") + name + "' exceeds 16 symbols");
    c.alphabet_sizes[name] = size;
  }
  const int nu = c.alphabet_sizes["U"], nw = c.alphabet_sizes["W"], nx = c.alphabet_sizes["X"];
  const int ny = c.alphabet_sizes["Y"], nv = c.alphabet_sizes["V"];

  const double row_tol = 1e-9;
  try {
    auto p_u = detail::dist_row(detail::field(j, "p_u"), "p_u", nu);
    LabeledJoint pu({{"U", nu}}, std::move(p_u), row_tol);
    ChannelKernel w_u({{"U", nu}}, {{"W", nw}},
                      detail::kernel_rows(detail::field(j, "p_w_given_u"), "p_w_given_u", {nu},
                                          nw, row_tol),
                      row_tol);
    ChannelKernel x_uw({{"U", nu}, {"W", nw}}, {{"X", nx}},
                       detail::kernel_rows(detail::field(j, "p_x_given_uw"), "p_x_given_uw",
                                           {nu, nw}, nx, row_tol),
                       row_tol);
    ChannelKernel y_x({{"X", nx}}, {{"Y", ny}},
                      detail::kernel_rows(detail::field(j, "p_y_given_x"), "p_y_given_x", {nx},
                                          ny, row_tol),
                      row_tol);
    ChannelKernel v_wy({{"W", nw}, {"Y", ny}}, {{"V", nv}},
                       detail::kernel_rows(detail::field(j, "p_v_given_wy"), "p_v_given_wy",
                                           {nw, ny}, nv, row_tol),
                       row_tol);
    c.factors = TargetFactors{std::move(pu), std::move(w_u), std::move(x_uw), std::move(y_x),
                              std::move(v_wy)};
    if (j.contains("p_x_given_u") && j.contains("p_v_given_uxy")) {
      ChannelKernel x_u({{"U", nu}}, {{"X", nx}},
                        detail::kernel_rows(j.at("p_x_given_u"), "p_x_given_u", {nu}, nx, row_tol),
                        row_tol);
      ChannelKernel v_uxy({{"U", nu}, {"X", nx}, {"Y", ny}}, {{"V", nv}},
                          detail::kernel_rows(j.at("p_v_given_uxy"), "p_v_given_uxy",
                                              {nu, nx, ny}, nv, row_tol),
                          row_tol);
      c.four_factor = FourFactorTarget{std::move(x_u), std::move(v_uxy)};
    }
  } catch (const shape_error& e) {
    throw config_error(std::string("invalid distribution: ") + e.what());
  }

  c.n = j.contains("n") ? j.at("n").get<long long>() : 1;
  if (c.n < 1) throw config_error("n must be >= 1");
  c.r0 = detail::num_field(j, "R0");
  c.r = detail::num_field(j, "R");
  if (c.r0 < 0.0 || c.r < 0.0) throw config_error("rates must be nonnegative");

  if (j.contains("gamma")) {
    const auto& g = j.at("gamma");
    if (g.is_string()) {
      if (g.get<std::string>() != "default")
        throw config_error("gamma must be \"default\" or an object");
    } else {
      GammaChoice gc{detail::num_field(g, "gamma1"), detail::num_field(g, "gamma2"),
                     detail::num_field(g, "gamma3")};
      if (gc.gamma1 <= 0.0 || gc.gamma2 <= 0.0 || gc.gamma3 <= 0.0)
        throw config_error("gammas must be positive");
      c.gamma = gc;
    }
  }

  if (j.contains("eps1")) c.eps1 = j.at("eps1").get<double>();
  if (c.eps1 < 0.0) throw config_error("eps1 must be nonnegative");
  if (j.contains("eps4")) c.eps4 = j.at("eps4").get<double>();
  if (j.contains("eps5")) c.eps5 = j.at("eps5").get<double>();
  if (c.eps4 && c.eps5) throw config_error("supply only one of eps4 / eps5");

  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.contains("count")) c.seeds.count = s.at("count").get<int>();
    if (s.contains("base")) c.seeds.base = s.at("base").get<std::uint64_t>();
    if (c.seeds.count < 1) throw config_error("seeds.count must be >= 1");
  }
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("n_list")) {
    for (const auto& x : j.at("n_list")) {
      const long long n = x.get<long long>();
      if (n < 1) throw config_error("n_list entries must be >= 1");
      c.n_list.push_back(n);
    }
  }
  if (j.contains("samples")) c.samples = j.at("samples").get<long long>();
  if (c.samples < 1) throw config_error("samples must be >= 1");
  if (j.contains("f_strategy")) c.f_strategy = j.at("f_strategy").get<std::string>();
  if (c.f_strategy != "uniform" && c.f_strategy != "exhaustive" && c.f_strategy != "greedy" &&
      c.f_strategy != "sampled")
    throw config_error("f_strategy must be uniform, exhaustive, greedy, or sampled");
  if (j.contains("fixed_f")) {
    std::vector<int> f;
    for (const auto& x : j.at("fixed_f")) f.push_back(x.get<int>());
    c.fixed_f = std::move(f);
  }
  if (j.contains("episode_log_limit")) c.episode_log_limit = j.at("episode_log_limit").get<long long>();
  if (j.contains("dump_joints")) c.dump_joints = j.at("dump_joints").get<bool>();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("cannot read config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    // translate the byte offset into a line number
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min(bytes.size(), static_cast<std::size_t>(e.byte)); ++i)
      if (bytes[i] == '\n') ++line;
    throw config_error("config parse error at line " + std::to_string(line) + ": " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  c.config_hash = detail::fnv1a(bytes);
  return c;
}

namespace detail {

struct CsvWriter {
  std::ofstream out;
  CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash,
            const std::string& header) {
    out.open(path, std::ios::binary);  // '\n' endings on every platform
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << "# " << kToolVersion << " config=" << hex16(config_hash) << "\n";
    out << header << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
    out << "\n";
  }
};

struct GammaResolved {
  GammaChoice g;
};

inline GammaChoice resolve_gamma(const ExperimentConfig& c, long long n) {
  if (c.gamma) return *c.gamma;
  if (n < 2)
    throw config_error("the default gamma choice needs n >= 2; supply explicit gammas for n = 1");
  return default_gamma(n);
}

inline RegionQuery region_query(const ExperimentConfig& c, long long n, bool with_rates) {
  RegionQuery q;
  q.n = n;
  q.eps1 = c.eps1;
  q.eps4 = c.eps4;
  q.eps5 = c.eps5;
  if (!q.eps4 && !q.eps5) q.eps4 = 0.05;
  q.r0 = std::log2(static_cast<double>(bin_count_for_rate(c.r0)));
  if (with_rates) {
    q.r = std::log2(static_cast<double>(bin_count_for_rate(c.r)));
    q.gamma = resolve_gamma(c, n);
  }
  return q;
}

}  // namespace detail

/// Seed-sweep measurements of the exact scheme distances, plus the matching
/// bounds, written to compare.csv.
struct ExactRunResult {
  double mean_full = 0.0, mean_minf_rb_rc = 0.0, mean_uniformity = 0.0, mean_decode = 0.0;
  double bound_first = 0.0, bound_tot = 0.0, bound_app = 0.0, bound_dec = 0.0;
  bool pass = true;
};

namespace detail {

inline double stddev_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size() - 1));
}

inline std::string verdict(double mean, double sd, std::size_t count, double bound) {
  const double margin = 3.0 * sd / std::sqrt(static_cast<double>(count));
  if (bound > 2.0) return "vacuous";
  return mean <= bound + margin ? "pass" : "fail";
}

}  // namespace detail

inline ExactRunResult run_exact_mode(const ExperimentConfig& c, const std::filesystem::path& dir,
                                     std::ostream& log) {
  const TargetFactors& f = *c.factors;
  const LabeledJoint target = target_joint(f);
  const int w_size = c.alphabet_sizes.at("W");
  const int n = static_cast<int>(c.n);
  const GammaChoice g = detail::resolve_gamma(c, c.n);

  std::vector<double> rb_marg, uniformity, decode, full, minf_rb, minf_tgt, rc_marg;
  std::vector<std::string> best_fs;
  RealizedRates rr{};

  // binning audit log: (seed, sizes) reconstructs each pair; maps for reading
  detail::CsvWriter bin_csv(dir / "binnings.csv", c.config_hash,
                            "seed,bins_k,bins_m,phi1,phi2");

  for (int sidx = 0; sidx < c.seeds.count; ++sidx) {
    const std::uint64_t seed = c.seeds.base + static_cast<std::uint64_t>(sidx);
    const auto bp = draw_binning(w_size, c.r0, c.r, seed);
    rr = bp.realized();
    {
      std::string p1, p2;
      for (int b : bp.phi1) p1 += std::to_string(b);
      for (int b : bp.phi2) p2 += std::to_string(b);
      bin_csv.row({std::to_string(seed), std::to_string(bp.bins_k), std::to_string(bp.bins_m),
                   p1, p2});
    }
    const FixedLengthScheme s{build_one_shot(f, bp), n};
    const auto& os = s.one_shot;

    // binning-side marginal identity over {U, W, X, Y, V}^n
    std::vector<LabeledJoint> rb_syms(static_cast<std::size_t>(n),
                                      marginalize(os.rb_joint, {"U", "W", "X", "Y", "V"}));
    std::vector<const LabeledJoint*> rb_sym_ptr;
    for (auto& x : rb_syms) rb_sym_ptr.push_back(&x);
    rb_marg.push_back(
        l1_distance(product_sequence(rb_sym_ptr), product_power(target, n)));

    // uniformity of the bin indices against Q_K Q_M P_U, per block
    std::vector<LabeledJoint> ucf(static_cast<std::size_t>(n),
                                  marginalize(os.rb_joint, {"U", "K", "M"}));
    const LabeledJoint ideal_sym = tensor_product(
        tensor_product(uniform_joint(os.k_axis), uniform_joint(os.m_axis)), f.p_u);
    std::vector<LabeledJoint> ideal(static_cast<std::size_t>(n), ideal_sym);
    std::vector<const LabeledJoint*> ucf_ptr, ideal_ptr;
    for (auto& x : ucf) ucf_ptr.push_back(&x);
    for (auto& x : ideal) ideal_ptr.push_back(&x);
    uniformity.push_back(l1_distance(product_sequence(ucf_ptr), product_sequence(ideal_ptr)));

    // block decode error 1 - (1 - e1)^n on the binning side
    const double e1 = decode_error_probability(os.rb_joint);
    decode.push_back(1.0 - std::pow(1.0 - e1, n));

    // full-tuple distance between the two schemes
    std::vector<LabeledJoint> rbs(static_cast<std::size_t>(n), os.rb_joint);
    std::vector<LabeledJoint> rcs(static_cast<std::size_t>(n), os.rc_joint);
    std::vector<const LabeledJoint*> rb_ptr, rc_ptr;
    for (auto& x : rbs) rb_ptr.push_back(&x);
    for (auto& x : rcs) rc_ptr.push_back(&x);
    full.push_back(l1_distance(product_sequence(rb_ptr), product_sequence(rc_ptr)));

    // derandomized instance
    const auto sel_rb = select_f(s, FStrategy::exhaustive, FMetric::to_rb);
    const auto sel_tgt = select_f(s, FStrategy::exhaustive, FMetric::to_target);
    minf_rb.push_back(sel_rb.bound);
    minf_tgt.push_back(sel_tgt.bound);
    rc_marg.push_back(l1_to_target(s, exact_induced(s)));
    std::string fstr;
    for (int m : sel_tgt.f) fstr += std::to_string(m);
    best_fs.push_back(fstr);
  }

  const double e_app = eps_app(target, rr, c.n, g.gamma1);
  const double e_dec = eps_dec(target, rr, c.n, g.gamma2);
  const double e_app2 = eps_app2(target, rr, c.n, g.gamma3);
  const double e_tot = eps_tot(e_app2, e_app, e_dec);

  const auto mean = [](const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
  };

  detail::CsvWriter csv(dir / "compare.csv", c.config_hash,
                        "section,seed,l1_rb_marginal,bin_uniformity,decode_error,l1_full,"
                        "minf_rb_rc,minf_rc_target,l1_rc_marginal,best_f");
  for (int sidx = 0; sidx < c.seeds.count; ++sidx) {
    const auto i = static_cast<std::size_t>(sidx);
    csv.row({"seed", std::to_string(c.seeds.base + static_cast<std::uint64_t>(sidx)),
             detail::fmt12(rb_marg[i]), detail::fmt12(uniformity[i]), detail::fmt12(decode[i]),
             detail::fmt12(full[i]), detail::fmt12(minf_rb[i]), detail::fmt12(minf_tgt[i]),
             detail::fmt12(rc_marg[i]), best_fs[i]});
  }
  ExactRunResult r;
  r.mean_uniformity = mean(uniformity);
  r.mean_decode = mean(decode);
  r.mean_full = mean(full);
  r.mean_minf_rb_rc = mean(minf_rb);
  r.bound_app = e_app;
  r.bound_dec = e_dec;
  r.bound_first = e_app + 5.0 * e_dec;
  r.bound_tot = e_tot;
  const double mean_rbm = mean(rb_marg);
  const double mean_minf_tgt = mean(minf_tgt);
  const double mean_rcm = mean(rc_marg);

  csv.row({"summary", "mean", detail::fmt12(mean_rbm), detail::fmt12(r.mean_uniformity),
           detail::fmt12(r.mean_decode), detail::fmt12(r.mean_full),
           detail::fmt12(r.mean_minf_rb_rc), detail::fmt12(mean_minf_tgt),
           detail::fmt12(mean_rcm), "-"});
  csv.row({"summary", "stderr", "0", detail::fmt12(detail::stddev_of(uniformity, r.mean_uniformity)),
           detail::fmt12(detail::stddev_of(decode, r.mean_decode)),
           detail::fmt12(detail::stddev_of(full, r.mean_full)),
           detail::fmt12(detail::stddev_of(minf_rb, r.mean_minf_rb_rc)),
           detail::fmt12(detail::stddev_of(minf_tgt, mean_minf_tgt)),
           detail::fmt12(detail::stddev_of(rc_marg, mean_rcm)), "-"});
  csv.row({"summary", "bound", "1e-12", detail::fmt12(e_app), detail::fmt12(e_dec),
           detail::fmt12(r.bound_first), detail::fmt12(e_tot), detail::fmt12(e_tot), "-", "-"});

  const std::size_t cnt = static_cast<std::size_t>(c.seeds.count);
  const std::string v_rbm = mean_rbm <= 1e-12 ? "pass" : "fail";
  const std::string v_uni = detail::verdict(r.mean_uniformity, detail::stddev_of(uniformity, r.mean_uniformity), cnt, e_app);
  const std::string v_dec = detail::verdict(r.mean_decode, detail::stddev_of(decode, r.mean_decode), cnt, e_dec);
  const std::string v_full = detail::verdict(r.mean_full, detail::stddev_of(full, r.mean_full), cnt, r.bound_first);
  const std::string v_minf = detail::verdict(r.mean_minf_rb_rc, detail::stddev_of(minf_rb, r.mean_minf_rb_rc), cnt, e_tot);
  const std::string v_minf_t = detail::verdict(mean_minf_tgt, detail::stddev_of(minf_tgt, mean_minf_tgt), cnt, e_tot);
  csv.row({"summary", "verdict", v_rbm, v_uni, v_dec, v_full, v_minf, v_minf_t, "-", "-"});

  for (const auto& v : {v_rbm, v_uni, v_dec, v_full, v_minf, v_minf_t})
    if (v == "fail") r.pass = false;

  if (c.dump_joints) {
    const FixedLengthScheme s{build_one_shot(f, draw_binning(w_size, c.r0, c.r, c.seeds.base)), n};
    const LabeledJoint induced = exact_induced(s);
    const LabeledJoint ideal = product_power(marginalize(target, {"U", "X", "Y", "V"}), n);
    detail::CsvWriter csvj(dir / "induced.csv", c.config_hash, "u,v,x,y,induced,target");
    Symbols sym(induced.axes().size(), 0);
    std::size_t flat = 0;
    do {
      csvj.row({std::to_string(sym[0]), std::to_string(sym[1]), std::to_string(sym[2]),
                std::to_string(sym[3]), detail::fmt12(induced.prob_flat(flat)),
                detail::fmt12(ideal.prob_flat(flat))});
      ++flat;
    } while (advance_symbols(induced.axes(), sym));
  }

  log << "exact: seeds=" << c.seeds.count << " n=" << c.n << " mean_full=" << r.mean_full
      << " bound_first=" << r.bound_first << " mean_minf=" << r.mean_minf_rb_rc
      << " eps_tot=" << r.bound_tot << (r.pass ? " [pass]" : " [FAIL]") << "\n";
  return r;
}

inline void run_bounds_mode(const ExperimentConfig& c, const std::filesystem::path& dir,
                            std::ostream& log) {
  const LabeledJoint target = target_joint(*c.factors);
  const GammaChoice g = detail::resolve_gamma(c, c.n);
  const auto bp = draw_binning(c.alphabet_sizes.at("W"), c.r0, c.r, 0);
  const RealizedRates rr = bp.realized();

  const double e_app = eps_app(target, rr, c.n, g.gamma1);
  const double e_dec = eps_dec(target, rr, c.n, g.gamma2);
  const double e_app2 = eps_app2(target, rr, c.n, g.gamma3);
  const double e_tot = eps_tot(e_app2, e_app, e_dec);
  const auto [e2, e3] = typicality_constants(target, c.eps1);
  const Dispersion disp = channel_dispersion(target);
  const double be_term = disp.degenerate ? 0.0 : disp.be_constant / std::sqrt(double(c.n));
  double eps4 = 0.0, eps5 = 0.0;
  if (c.eps5) {
    eps5 = *c.eps5;
    eps4 = eps5 + be_term;
  } else {
    eps4 = c.eps4.value_or(0.05);
    eps5 = eps4 - be_term;
  }
  const double e_tot_theory = eps_tot_theoretical(std::max(0.0, eps5), c.n);

  detail::CsvWriter csv(dir / "bounds.csv", c.config_hash,
                        "n,R,R0,R_realized,R0_realized,gamma1,gamma2,gamma3,eps1,eps2,eps3,"
                        "eps4,eps5,eps_app,eps_dec,eps_app2,eps_tot,eps_tot_theoretical");
  csv.row({std::to_string(c.n), detail::fmt12(c.r), detail::fmt12(c.r0),
           detail::fmt12(rr.r), detail::fmt12(rr.r0), detail::fmt12(g.gamma1),
           detail::fmt12(g.gamma2), detail::fmt12(g.gamma3), detail::fmt12(c.eps1),
           detail::fmt12(e2), detail::fmt12(e3), detail::fmt12(eps4), detail::fmt12(eps5),
           detail::fmt12(e_app), detail::fmt12(e_dec), detail::fmt12(e_app2),
           detail::fmt12(e_tot), detail::fmt12(e_tot_theory)});
  log << "bounds: n=" << c.n << " eps_tot=" << e_tot << " eps_tot_theoretical=" << e_tot_theory
      << "\n";
}

inline void run_region_mode(const ExperimentConfig& c, const std::filesystem::path& dir,
                            std::ostream& log) {
  const LabeledJoint target = target_joint(*c.factors);
  std::vector<long long> ns = c.n_list.empty() ? std::vector<long long>{c.n} : c.n_list;

  detail::CsvWriter csv(dir / "region.csv", c.config_hash,
                        "n,R,R0,I_WU,I_WY,I_WUXV_Y,V_disp,B_n,eps1,eps2,eps3,eps4,eps5,"
                        "eps_app,eps_dec,eps_app2,eps_tot,corr_info,corr_R0,feasible_info,R0_min");
  for (long long n : ns) {
    const auto q = detail::region_query(c, n, /*with_rates=*/true);
    const RegionReport rep = rate_region_point(target, q);
    csv.row({std::to_string(rep.n), detail::fmt12(rep.r), detail::fmt12(rep.r0),
             detail::fmt12(rep.i_wu), detail::fmt12(rep.i_wy), detail::fmt12(rep.i_wuxv_y),
             detail::fmt12(rep.v_disp), detail::fmt12(rep.b_n), detail::fmt12(rep.eps.eps1),
             detail::fmt12(rep.eps.eps2), detail::fmt12(rep.eps.eps3),
             detail::fmt12(rep.eps.eps4), detail::fmt12(rep.eps.eps5),
             detail::fmt12(rep.eps.eps_app), detail::fmt12(rep.eps.eps_dec),
             detail::fmt12(rep.eps.eps_app2), detail::fmt12(rep.eps.eps_tot),
             detail::fmt12(rep.corr_info), detail::fmt12(rep.corr_r0),
             rep.feasible_info ? "1" : "0", detail::fmt12(rep.r0_min)});
  }
  log << "region: " << ns.size() << " grid points\n";
}

inline bool run_montecarlo_mode(const ExperimentConfig& c, const std::filesystem::path& dir,
                                std::ostream& log) {
  const TargetFactors& f = *c.factors;
  const int w_size = c.alphabet_sizes.at("W");
  const auto bp = draw_binning(w_size, c.r0, c.r, c.seeds.base);
  const FixedLengthScheme s{build_one_shot(f, bp), static_cast<int>(c.n)};

  std::optional<std::vector<int>> fixed;
  if (c.fixed_f) {
    fixed = c.fixed_f;
  } else if (c.f_strategy == "exhaustive") {
    fixed = select_f(s, FStrategy::exhaustive).f;
  } else if (c.f_strategy == "greedy") {
    fixed = select_f(s, FStrategy::greedy).f;
  } else if (c.f_strategy == "sampled") {
    CounterRng fr(c.seeds.base, 0x5eed);
    fixed = select_f(s, FStrategy::sampled, FMetric::to_target, 32, &fr).f;
  }

  // episode log
  {
    detail::CsvWriter csv(dir / "episodes.csv", c.config_hash, "seed,i,u,w,x,y,wh,v,k,m");
    const EpisodeSampler sampler(s);
    CounterRng rng(c.seeds.base, 1);
    long long rows = 0;
    for (long long e = 0; e < c.samples && rows < c.episode_log_limit; ++e) {
      const auto ep = sampler.run(rng, fixed);
      for (int i = 0; i < s.n && rows < c.episode_log_limit; ++i, ++rows) {
        const auto idx = static_cast<std::size_t>(i);
        csv.row({std::to_string(c.seeds.base), std::to_string(i), std::to_string(ep.u[idx]),
                 std::to_string(ep.w[idx]), std::to_string(ep.x[idx]), std::to_string(ep.y[idx]),
                 std::to_string(ep.wh[idx]), std::to_string(ep.v[idx]), std::to_string(ep.k[idx]),
                 std::to_string(ep.m[idx])});
      }
    }
  }

  CounterRng rng(c.seeds.base, 2);
  const auto est = empirical_l1(s, fixed, c.samples, rng);

  const GammaChoice g = detail::resolve_gamma(c, c.n);
  const LabeledJoint target = target_joint(f);
  const RealizedRates rr = bp.realized();
  const double e_app = eps_app(target, rr, c.n, g.gamma1);
  const double e_dec = eps_dec(target, rr, c.n, g.gamma2);
  const double e_app2 = eps_app2(target, rr, c.n, g.gamma3);
  const double bound = eps_tot(e_app2, e_app, e_dec);
  // plug-in bias floor sqrt(states / samples) on top of the theoretical bound
  const double states = std::pow(
      double(c.alphabet_sizes.at("U")) * c.alphabet_sizes.at("X") * c.alphabet_sizes.at("Y") *
          c.alphabet_sizes.at("V"),
      double(c.n));
  const double floor_bias = std::sqrt(states / static_cast<double>(c.samples));
  const bool pass = bound > 2.0 || est.estimate <= bound + floor_bias + 3.0 * est.stderr_boot;

  detail::CsvWriter csv(dir / "compare.csv", c.config_hash, "quantity,value");
  csv.row({"empirical_l1", detail::fmt12(est.estimate)});
  csv.row({"stderr_bootstrap", detail::fmt12(est.stderr_boot)});
  csv.row({"plugin_bias_floor", detail::fmt12(floor_bias)});
  csv.row({"bound_eps_tot", detail::fmt12(bound)});
  csv.row({"verdict", bound > 2.0 ? "vacuous" : (pass ? "pass" : "fail")});
  log << "montecarlo: samples=" << c.samples << " estimate=" << est.estimate
      << " bound=" << bound << (pass ? " [pass]" : " [FAIL]") << "\n";
  return pass;
}

inline bool run_validate_mode(const ExperimentConfig& c, std::ostream& log) {
  const auto check = validate_decomposition(*c.factors, 1e-9, c.four_factor);
  log << "validate: residual=" << detail::fmt12(check.residual)
      << " valid=" << (check.valid ? "yes" : "no") << "\n";
  return check.valid;
}

inline void write_manifest(const ExperimentConfig& c, const std::filesystem::path& dir,
                           const std::string& mode_name) {
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  const auto bp = draw_binning(c.alphabet_sizes.at("W"), c.r0, c.r, c.seeds.base);
  out << "tool: " << kToolVersion << "\n";
  out << "config_hash: " << detail::hex16(c.config_hash) << "\n";
  out << "mode: " << mode_name << "\n";
  out << "n: " << c.n << "\n";
  out << "R0_requested: " << detail::fmt12(c.r0) << " R0_realized: " << detail::fmt12(bp.realized_r0())
      << " bins_k: " << bp.bins_k << "\n";
  out << "R_requested: " << detail::fmt12(c.r) << " R_realized: " << detail::fmt12(bp.realized_r())
      << " bins_m: " << bp.bins_m << "\n";
  out << "seeds: base=" << c.seeds.base << " count=" << c.seeds.count << "\n";
}

/// Dispatch one experiment; returns the process exit code
/// (0 ok, 2 config, 3 resource cap, 4 comparison failure).
inline int run_experiment(const ExperimentConfig& c, std::ostream& log) {
  try {
    const std::filesystem::path dir(c.out_dir);
    std::filesystem::create_directories(dir);
    switch (c.mode) {
      case RunMode::validate: {
        write_manifest(c, dir, "validate");
        return run_validate_mode(c, log) ? 0 : 4;
      }
      case RunMode::bounds: {
        write_manifest(c, dir, "bounds");
        run_bounds_mode(c, dir, log);
        return 0;
      }
      case RunMode::region: {
        write_manifest(c, dir, "region");
        run_region_mode(c, dir, log);
        return 0;
      }
      case RunMode::exact: {
        write_manifest(c, dir, "exact");
        return run_exact_mode(c, dir, log).pass ? 0 : 4;
      }
      case RunMode::montecarlo: {
        write_manifest(c, dir, "montecarlo");
        return run_montecarlo_mode(c, dir, log) ? 0 : 4;
      }
    }
    return 2;
  } catch (const config_error& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const resource_error& e) {
    log << "resource cap: " << e.what() << "\n";
    return 3;
  } catch (const shape_error& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    log << "config error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace coordsim
