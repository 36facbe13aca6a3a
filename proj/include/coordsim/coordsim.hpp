#pragma once

#include "coordsim/binning.hpp"
#include "coordsim/bounds.hpp"
#include "coordsim/core.hpp"
#include "coordsim/factors.hpp"
#include "coordsim/info.hpp"
#include "coordsim/joint.hpp"
#include "coordsim/rng.hpp"
#include "coordsim/sim.hpp"
