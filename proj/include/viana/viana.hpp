#pragma once

#include "viana/config.hpp"
#include "viana/decomposition.hpp"
#include "viana/errors.hpp"
#include "viana/expansivity.hpp"
#include "viana/experiment.hpp"
#include "viana/hyperbolic.hpp"
#include "viana/large_deviations.hpp"
#include "viana/map.hpp"
#include "viana/parallel.hpp"
#include "viana/potential.hpp"
#include "viana/pressure.hpp"
#include "viana/rng.hpp"
#include "viana/specification.hpp"
#include "viana/stats.hpp"
#include "viana/svg.hpp"
#include "viana/system.hpp"
#include "viana/tangent.hpp"
#include "viana/tracked.hpp"
