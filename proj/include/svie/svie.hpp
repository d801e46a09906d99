#pragma once

// Stochastic Volterra integral equations driven by fractional Brownian motion
// (H > 1/2): exact fBm sampling, pathwise Young solvers for the equation and
// its sensitivity system, explicit sup-norm bound evaluation, and Malliavin
// nondegeneracy / density diagnostics.

#include "svie/bounds.hpp"
#include "svie/coefficients.hpp"
#include "svie/config.hpp"
#include "svie/errors.hpp"
#include "svie/experiments.hpp"
#include "svie/fbm.hpp"
#include "svie/frac_calc.hpp"
#include "svie/grid.hpp"
#include "svie/malliavin.hpp"
#include "svie/parallel.hpp"
#include "svie/quadrature.hpp"
#include "svie/rng.hpp"
#include "svie/stats.hpp"
#include "svie/volterra.hpp"
