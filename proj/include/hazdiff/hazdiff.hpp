#pragma once

#include "hazdiff/ahaz_lasso.hpp"
#include "hazdiff/baseline_hazard.hpp"
#include "hazdiff/common.hpp"
#include "hazdiff/crossfit.hpp"
#include "hazdiff/diagnostics.hpp"
#include "hazdiff/error.hpp"
#include "hazdiff/estimators.hpp"
#include "hazdiff/folds.hpp"
#include "hazdiff/hdi_estimator.hpp"
#include "hazdiff/logit_lasso.hpp"
#include "hazdiff/nuisance.hpp"
#include "hazdiff/parallel.hpp"
#include "hazdiff/penalty_grid.hpp"
#include "hazdiff/report.hpp"
#include "hazdiff/rng.hpp"
#include "hazdiff/score_engine.hpp"
#include "hazdiff/simulation.hpp"
#include "hazdiff/survival_data.hpp"
