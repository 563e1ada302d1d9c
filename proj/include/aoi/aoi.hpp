#pragma once

#include "aoi/analytic.hpp"
#include "aoi/config.hpp"
#include "aoi/error.hpp"
#include "aoi/model.hpp"
#include "aoi/optimizer.hpp"
#include "aoi/rng.hpp"
#include "aoi/simulator.hpp"
#include "aoi/sweep.hpp"
