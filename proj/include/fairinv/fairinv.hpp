#pragma once

#include "fairinv/rng.hpp"
#include "fairinv/distributions.hpp"
#include "fairinv/inventory.hpp"
#include "fairinv/policies.hpp"
#include "fairinv/metrics.hpp"
#include "fairinv/analysis/birth_death.hpp"
#include "fairinv/analysis/binomial.hpp"
#include "fairinv/analysis/conditions.hpp"
#include "fairinv/analysis/hitting.hpp"
#include "fairinv/eg_solver.hpp"
#include "fairinv/harness/config.hpp"
#include "fairinv/harness/experiment.hpp"
#include "fairinv/harness/scaling.hpp"
#include "fairinv/harness/io.hpp"
#include "fairinv/verify.hpp"
