#pragma once

#include "uvolmax/constraints.hpp"
#include "uvolmax/errors.hpp"
#include "uvolmax/generators.hpp"
#include "uvolmax/market.hpp"
#include "uvolmax/measure_eval.hpp"
#include "uvolmax/optimize.hpp"
#include "uvolmax/parallel.hpp"
#include "uvolmax/pde_grid.hpp"
#include "uvolmax/pde_kernels.hpp"
#include "uvolmax/robust_solver.hpp"
#include "uvolmax/volatility_path.hpp"
