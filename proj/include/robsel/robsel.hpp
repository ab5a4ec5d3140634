#pragma once

// Robust bootstrap model selection for generalized linear models:
// estimators, stratified m-out-of-n resampling, the selection criterion,
// search strategies, variance diagnostics, and the simulation harness.

#include "robsel/bootstrap.hpp"
#include "robsel/config.hpp"
#include "robsel/criterion.hpp"
#include "robsel/csv.hpp"
#include "robsel/dataset.hpp"
#include "robsel/errors.hpp"
#include "robsel/estimators.hpp"
#include "robsel/family.hpp"
#include "robsel/loss.hpp"
#include "robsel/rng.hpp"
#include "robsel/selection.hpp"
#include "robsel/simulation.hpp"
#include "robsel/theory.hpp"
