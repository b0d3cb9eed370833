#pragma once

// Local randomization analysis for regression discontinuity designs:
// window selection by randomization tests of covariate balance under a
// posited local assignment mechanism, and Neymanian estimation of the
// local complier average treatment effect under complete and block
// randomization, including fuzzy designs with one-sided noncompliance.

#include "rdlocal/errors.hpp"
#include "rdlocal/numeric.hpp"
#include "rdlocal/rng.hpp"
#include "rdlocal/normal.hpp"
#include "rdlocal/dataset.hpp"
#include "rdlocal/csv.hpp"
#include "rdlocal/mechanism.hpp"
#include "rdlocal/balance.hpp"
#include "rdlocal/estimation.hpp"
#include "rdlocal/sensitivity.hpp"
#include "rdlocal/simulation.hpp"
