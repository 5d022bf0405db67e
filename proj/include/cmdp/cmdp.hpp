#pragma once

#include "cmdp/error.hpp"
#include "cmdp/ergodic_po.hpp"
#include "cmdp/experiment.hpp"
#include "cmdp/fh_learner.hpp"
#include "cmdp/finite_horizon.hpp"
#include "cmdp/harness.hpp"
#include "cmdp/io.hpp"
#include "cmdp/kl_projection.hpp"
#include "cmdp/l1_ball.hpp"
#include "cmdp/lp.hpp"
#include "cmdp/markov.hpp"
#include "cmdp/model.hpp"
#include "cmdp/opt2.hpp"
#include "cmdp/planning.hpp"
#include "cmdp/rng.hpp"
#include "cmdp/simulation.hpp"
#include "cmdp/tolerances.hpp"
#include "cmdp/toml.hpp"
