#pragma once

#include "sssnet/bench.hpp"
#include "sssnet/checkpoint.hpp"
#include "sssnet/eigen_solver.hpp"
#include "sssnet/graph.hpp"
#include "sssnet/io.hpp"
#include "sssnet/kmeans.hpp"
#include "sssnet/metrics.hpp"
#include "sssnet/rng.hpp"
#include "sssnet/simpa.hpp"
#include "sssnet/spectral.hpp"
#include "sssnet/synthgen.hpp"
#include "sssnet/training.hpp"
#include "sssnet/types.hpp"
