// Umbrella header for the Tweedie claims reserving library.
#pragma once

#include "tweedie_reserve/io.hpp"
#include "tweedie_reserve/mcmc.hpp"
#include "tweedie_reserve/mle.hpp"
#include "tweedie_reserve/model.hpp"
#include "tweedie_reserve/model_choice.hpp"
#include "tweedie_reserve/nelder_mead.hpp"
#include "tweedie_reserve/random.hpp"
#include "tweedie_reserve/reserving.hpp"
#include "tweedie_reserve/stats.hpp"
#include "tweedie_reserve/triangle.hpp"
#include "tweedie_reserve/truncated_normal.hpp"
#include "tweedie_reserve/tweedie_density.hpp"
