#pragma once

// Randomization-based estimation of complier treatment effects on binary
// outcomes under one-sided or two-sided noncompliance: unadjusted,
// covariate-interacted, imputation, and calibrated-imputation ratio
// estimators with conservative finite-population variances, a threshold
// uptake simulation bench, and synthetic-population replay.

#include "cate/commands.hpp"
#include "cate/config.hpp"
#include "cate/csv.hpp"
#include "cate/data_model.hpp"
#include "cate/error.hpp"
#include "cate/estimators.hpp"
#include "cate/logistic.hpp"
#include "cate/normal.hpp"
#include "cate/ols.hpp"
#include "cate/randomization.hpp"
#include "cate/rng.hpp"
#include "cate/simulation.hpp"
