#pragma once

#include "coco/experiment.hpp"
#include "coco/graph.hpp"
#include "coco/ids.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/rng.hpp"
#include "coco/scaler.hpp"
#include "coco/scheduler.hpp"
#include "coco/sim.hpp"
#include "coco/solver.hpp"
#include "coco/topologies.hpp"
