#pragma once

#include "ctxbandit/error.hpp"
#include "ctxbandit/linalg.hpp"
#include "ctxbandit/rng.hpp"
#include "ctxbandit/contexts.hpp"
#include "ctxbandit/features.hpp"
#include "ctxbandit/environment.hpp"
#include "ctxbandit/agent.hpp"
#include "ctxbandit/protocol.hpp"
#include "ctxbandit/ratings.hpp"
#include "ctxbandit/experiment.hpp"
#include "ctxbandit/diagnostics.hpp"
