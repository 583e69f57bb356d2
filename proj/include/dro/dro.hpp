#pragma once

// Umbrella header for the distributionally robust inference toolkit.

#include "dro/bench.hpp"
#include "dro/datagen.hpp"
#include "dro/divergence.hpp"
#include "dro/inference.hpp"
#include "dro/inner.hpp"
#include "dro/outer.hpp"
#include "dro/problems.hpp"
#include "dro/rng.hpp"
#include "dro/stats.hpp"
