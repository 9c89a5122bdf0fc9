#pragma once

// Umbrella header for the HAR optimization pipeline library.

#include "har/bench/bench.hpp"
#include "har/bench/reference_cnn.hpp"
#include "har/core/checkpoint.hpp"
#include "har/core/error.hpp"
#include "har/core/graph.hpp"
#include "har/core/init.hpp"
#include "har/core/random.hpp"
#include "har/core/tensor.hpp"
#include "har/data/cache.hpp"
#include "har/data/dataset.hpp"
#include "har/data/wisdm.hpp"
#include "har/metrics/metrics.hpp"
#include "har/msti/config.hpp"
#include "har/msti/model.hpp"
#include "har/pipeline/config.hpp"
#include "har/pipeline/pipeline.hpp"
#include "har/synth/diffusion.hpp"
#include "har/synth/features.hpp"
#include "har/train/adam.hpp"
#include "har/train/losses.hpp"
#include "har/train/trainer.hpp"
