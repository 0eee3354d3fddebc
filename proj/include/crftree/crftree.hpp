#pragma once

#include "crftree/baseline.hpp"
#include "crftree/dtree.hpp"
#include "crftree/graph.hpp"
#include "crftree/inference.hpp"
#include "crftree/io.hpp"
#include "crftree/learner.hpp"
#include "crftree/maxflow.hpp"
#include "crftree/metrics.hpp"
#include "crftree/potentials.hpp"
#include "crftree/qp.hpp"
#include "crftree/synth.hpp"
