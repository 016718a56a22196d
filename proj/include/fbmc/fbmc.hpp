#ifndef FBMC_FBMC_HPP
#define FBMC_FBMC_HPP

#include "fbmc/chance.hpp"
#include "fbmc/config.hpp"
#include "fbmc/conic.hpp"
#include "fbmc/dispatch.hpp"
#include "fbmc/fb_params.hpp"
#include "fbmc/geometry.hpp"
#include "fbmc/grid.hpp"
#include "fbmc/montecarlo.hpp"
#include "fbmc/pipeline.hpp"
#include "fbmc/report.hpp"
#include "fbmc/results.hpp"

#endif  // FBMC_FBMC_HPP
