#pragma once

// Umbrella header for the FastTD3 training engine.

#include "fasttd3/bench.hpp"
#include "fasttd3/checkpoint.hpp"
#include "fasttd3/config.hpp"
#include "fasttd3/distributional.hpp"
#include "fasttd3/envs.hpp"
#include "fasttd3/error.hpp"
#include "fasttd3/exploration.hpp"
#include "fasttd3/metrics.hpp"
#include "fasttd3/mlp.hpp"
#include "fasttd3/networks.hpp"
#include "fasttd3/replay.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/serialize.hpp"
#include "fasttd3/tensor.hpp"
#include "fasttd3/trainer.hpp"
