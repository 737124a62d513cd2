#pragma once

// Umbrella header.

#include "mrsmil/errors.hpp"

#include "mrsmil/nn/adam.hpp"
#include "mrsmil/nn/layers.hpp"
#include "mrsmil/nn/loss.hpp"
#include "mrsmil/nn/tensor.hpp"

#include "mrsmil/pooling/aggregator.hpp"
#include "mrsmil/pooling/attention.hpp"
#include "mrsmil/pooling/three_pool.hpp"

#include "mrsmil/models/builders.hpp"
#include "mrsmil/models/checkpoint.hpp"
#include "mrsmil/models/config.hpp"
#include "mrsmil/models/inception.hpp"
#include "mrsmil/models/model.hpp"

#include "mrsmil/data/bags.hpp"
#include "mrsmil/data/csv.hpp"
#include "mrsmil/data/folds.hpp"
#include "mrsmil/data/rng.hpp"
#include "mrsmil/data/spectrum.hpp"
#include "mrsmil/data/synth.hpp"

#include "mrsmil/eval/confusion.hpp"
#include "mrsmil/eval/roc.hpp"
#include "mrsmil/eval/summary.hpp"

#include "mrsmil/pipeline/attention_export.hpp"
#include "mrsmil/pipeline/cross_validation.hpp"
#include "mrsmil/pipeline/reports.hpp"
#include "mrsmil/pipeline/run_config.hpp"
#include "mrsmil/pipeline/sweep.hpp"
