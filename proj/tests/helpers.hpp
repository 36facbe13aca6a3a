#pragma once

#include <vector>

#include "coordsim/coordsim.hpp"

namespace coordsim::testing {

inline ChannelKernel bsc(const std::string& in, const std::string& out, double flip) {
  return ChannelKernel({{in, 2}}, {{out, 2}}, {1.0 - flip, flip, flip, 1.0 - flip});
}

inline ChannelKernel copy_kernel(const std::vector<Alphabet>& in, const std::string& copied,
                                 const Alphabet& out) {
  std::vector<Alphabet> sorted = in;
  std::sort(sorted.begin(), sorted.end(),
            [](const Alphabet& a, const Alphabet& b) { return a.name < b.name; });
  int pos = -1;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (sorted[i].name == copied) pos = static_cast<int>(i);
  return deterministic_kernel(in, out, [pos](const Symbols& s) {
    return s[static_cast<std::size_t>(pos)];
  });
}

/// Binary bench instance: U ~ uniform, W = U through a BSC(0.2), X = W,
/// Y = X through a BSC(0.1), V = W.
inline TargetFactors desk_factors() {
  return TargetFactors{
      LabeledJoint({{"U", 2}}, {0.5, 0.5}),
      bsc("U", "W", 0.2),
      copy_kernel({{"U", 2}, {"W", 2}}, "W", {"X", 2}),
      bsc("X", "Y", 0.1),
      copy_kernel({{"W", 2}, {"Y", 2}}, "W", {"V", 2}),
  };
}

inline std::vector<double> random_simplex(std::size_t cells, CounterRng& rng, double floor = 1e-3) {
  std::vector<double> v(cells);
  double sum = 0.0;
  for (auto& x : v) {
    x = floor + rng.next_unit();
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

inline LabeledJoint random_joint(const std::vector<Alphabet>& axes, CounterRng& rng,
                                 double floor = 1e-3) {
  return LabeledJoint(axes, random_simplex(cell_count(axes), rng, floor), 1e-6);
}

inline ChannelKernel random_kernel(const std::vector<Alphabet>& in, const std::vector<Alphabet>& out,
                                   CounterRng& rng, double floor = 1e-3) {
  const std::size_t oc = cell_count(out);
  std::vector<double> probs;
  probs.reserve(cell_count(in) * oc);
  for (std::size_t r = 0; r < cell_count(in); ++r) {
    const auto row = random_simplex(oc, rng, floor);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return ChannelKernel(in, out, std::move(probs), 1e-6);
}

/// Random full-support five-factor decomposition on the standard axes.
inline TargetFactors random_factors(CounterRng& rng, int nu = 2, int nw = 3, int nx = 2, int ny = 2,
                                    int nv = 2) {
  return TargetFactors{
      random_joint({{"U", nu}}, rng),
      random_kernel({{"U", nu}}, {{"W", nw}}, rng),
      random_kernel({{"U", nu}, {"W", nw}}, {{"X", nx}}, rng),
      random_kernel({{"X", nx}}, {{"Y", ny}}, rng),
      random_kernel({{"W", nw}, {"Y", ny}}, {{"V", nv}}, rng),
  };
}

inline double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

}  // namespace coordsim::testing
