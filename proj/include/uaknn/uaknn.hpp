#pragma once

#include "core.hpp"
#include "data_io.hpp"
#include "evaluation.hpp"
#include "extreme_labels.hpp"
#include "metrics.hpp"
#include "predictors.hpp"
#include "prototypes.hpp"
#include "rng.hpp"
#include "search.hpp"
#include "weighting.hpp"
