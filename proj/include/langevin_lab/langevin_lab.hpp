#pragma once

#include "errors.hpp"
#include "rng.hpp"
#include "parallel.hpp"
#include "potentials.hpp"
#include "gaussian_law.hpp"
#include "grid_density.hpp"
#include "divergence.hpp"
#include "gaussian_oracle.hpp"
#include "decay_curve.hpp"
#include "planner.hpp"
#include "density_lab.hpp"
#include "sampler.hpp"
#include "harness.hpp"
