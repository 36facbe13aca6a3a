#pragma once

#include <optional>
#include <string>

#include "coordsim/joint.hpp"

namespace coordsim {

/// Five-factor decomposition of the one-shot target:
/// P_U * P_{W|U} * P_{X|UW} * P_{Y|X} * P_{V|WY} over axes {U, W, X, Y, V}.
struct TargetFactors {
  LabeledJoint p_u;
  ChannelKernel w_given_u;
  ChannelKernel x_given_uw;
  ChannelKernel y_given_x;
  ChannelKernel v_given_wy;
};

namespace detail {
inline void require_axis(const std::vector<Alphabet>& axes, std::string_view name,
                         const char* where) {
  for (const auto& a : axes)
    if (a.name == name) return;
  throw shape_error(std::string("factor ") + where + " is missing axis '" + std::string(name) +
                    "'");
}
}  // namespace detail

inline void validate_factor_axes(const TargetFactors& f) {
  detail::require_axis(f.p_u.axes(), "U", "P_U");
  detail::require_axis(f.w_given_u.in_axes(), "U", "W|U");
  detail::require_axis(f.w_given_u.out_axes(), "W", "W|U");
  detail::require_axis(f.x_given_uw.in_axes(), "U", "X|UW");
  detail::require_axis(f.x_given_uw.in_axes(), "W", "X|UW");
  detail::require_axis(f.x_given_uw.out_axes(), "X", "X|UW");
  detail::require_axis(f.y_given_x.in_axes(), "X", "Y|X");
  detail::require_axis(f.y_given_x.out_axes(), "Y", "Y|X");
  detail::require_axis(f.v_given_wy.in_axes(), "W", "V|WY");
  detail::require_axis(f.v_given_wy.in_axes(), "Y", "V|WY");
  detail::require_axis(f.v_given_wy.out_axes(), "V", "V|WY");
}

/// Chain the five factors into the one-shot target joint over {U, V, W, X, Y}.
inline LabeledJoint target_joint(const TargetFactors& f) {
  validate_factor_axes(f);
  return chain(chain(chain(chain(f.p_u, f.w_given_u), f.x_given_uw), f.y_given_x), f.v_given_wy);
}

/// Optional explicit four-factor form P_U * P_{X|U} * P_{Y|X} * P_{V|UXY}
/// of the same target, used to cross-check a candidate decomposition.
struct FourFactorTarget {
  ChannelKernel x_given_u;
  ChannelKernel v_given_uxy;
};

}  // namespace coordsim
