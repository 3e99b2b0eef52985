#pragma once

#include "lindt/error.hpp"
#include "lindt/gcn.hpp"
#include "lindt/graph.hpp"
#include "lindt/graph_io.hpp"
#include "lindt/inference.hpp"
#include "lindt/matrix.hpp"
#include "lindt/metrics.hpp"
#include "lindt/perturbation.hpp"
#include "lindt/scenario.hpp"
