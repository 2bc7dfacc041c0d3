#pragma once

#include "h2sls/common.hpp"
#include "h2sls/datagen.hpp"
#include "h2sls/diagnostics.hpp"
#include "h2sls/estimators.hpp"
#include "h2sls/harness.hpp"
#include "h2sls/rng.hpp"
#include "h2sls/solver.hpp"
