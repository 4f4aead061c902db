#pragma once

#include "ellcut/error.hpp"
#include "ellcut/ellipsoid.hpp"
#include "ellcut/oracles.hpp"
#include "ellcut/metastep.hpp"
#include "ellcut/programs.hpp"
#include "ellcut/lp_feasibility.hpp"
