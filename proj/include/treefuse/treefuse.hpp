#pragma once

#include "treefuse/code_design.hpp"
#include "treefuse/code_matrix.hpp"
#include "treefuse/error_analysis.hpp"
#include "treefuse/local_rules.hpp"
#include "treefuse/observation.hpp"
#include "treefuse/quadrature.hpp"
#include "treefuse/quantizer.hpp"
#include "treefuse/rng.hpp"
#include "treefuse/stats.hpp"
#include "treefuse/tree_sim.hpp"
#include "treefuse/version.hpp"
