#pragma once

#include "mvlrr/clustering.hpp"
#include "mvlrr/dataset.hpp"
#include "mvlrr/error.hpp"
#include "mvlrr/experiment.hpp"
#include "mvlrr/graph.hpp"
#include "mvlrr/metrics.hpp"
#include "mvlrr/proximal.hpp"
#include "mvlrr/random.hpp"
#include "mvlrr/solver.hpp"
