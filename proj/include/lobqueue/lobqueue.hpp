#pragma once

#include "config.hpp"
#include "diffusion.hpp"
#include "fluid.hpp"
#include "ldp.hpp"
#include "lob_simulator.hpp"
#include "numerics.hpp"
#include "order_flow.hpp"
#include "point_processes.hpp"
#include "rng.hpp"
#include "special_functions.hpp"
#include "statistics.hpp"
#include "verify.hpp"
