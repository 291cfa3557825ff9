#pragma once

// Umbrella header.

#include "smnarx/common.hpp"
#include "smnarx/dataset.hpp"
#include "smnarx/design.hpp"
#include "smnarx/em_estimator.hpp"
#include "smnarx/fb_inference.hpp"
#include "smnarx/io.hpp"
#include "smnarx/markov_sim.hpp"
#include "smnarx/metrics.hpp"
#include "smnarx/model.hpp"
#include "smnarx/parallel.hpp"
#include "smnarx/poly_basis.hpp"
#include "smnarx/rng.hpp"
#include "smnarx/sparse_solver.hpp"
