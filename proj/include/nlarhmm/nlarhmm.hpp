#pragma once

#include "nlarhmm/core.hpp"
#include "nlarhmm/basis.hpp"
#include "nlarhmm/cartesian_dynamics.hpp"
#include "nlarhmm/quaternion.hpp"
#include "nlarhmm/quaternion_dynamics.hpp"
#include "nlarhmm/layout.hpp"
#include "nlarhmm/composite_dynamics.hpp"
#include "nlarhmm/standardization.hpp"
#include "nlarhmm/model.hpp"
#include "nlarhmm/inference.hpp"
#include "nlarhmm/metrics.hpp"
#include "nlarhmm/simulate.hpp"
#include "nlarhmm/serialization.hpp"
#include "nlarhmm/io.hpp"
#include "nlarhmm/config.hpp"
