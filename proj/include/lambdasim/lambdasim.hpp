#pragma once

// Convenience umbrella for the whole library.

#include "lambdasim/analytic.hpp"
#include "lambdasim/effective.hpp"
#include "lambdasim/errors.hpp"
#include "lambdasim/model.hpp"
#include "lambdasim/runner.hpp"
#include "lambdasim/scenario.hpp"
#include "lambdasim/specfn.hpp"
#include "lambdasim/spectrum.hpp"
#include "lambdasim/tdse.hpp"
#include "lambdasim/timeseries.hpp"
