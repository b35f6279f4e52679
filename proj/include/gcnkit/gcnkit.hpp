#pragma once

#include "gcnkit/error.hpp"
#include "gcnkit/rng.hpp"
#include "gcnkit/tensor/dense.hpp"
#include "gcnkit/tensor/sparse.hpp"
#include "gcnkit/tensor/tape.hpp"
#include "gcnkit/tensor/ops.hpp"
#include "gcnkit/tensor/gradcheck.hpp"
#include "gcnkit/graphio/dataset.hpp"
#include "gcnkit/topology/topology.hpp"
#include "gcnkit/layers/activation.hpp"
#include "gcnkit/layers/model.hpp"
#include "gcnkit/confidence/confidence.hpp"
#include "gcnkit/training/train_config.hpp"
#include "gcnkit/training/metrics.hpp"
#include "gcnkit/training/adam.hpp"
#include "gcnkit/training/report.hpp"
#include "gcnkit/training/trainer.hpp"
#include "gcnkit/config.hpp"
#include "gcnkit/experiments/presets.hpp"
#include "gcnkit/experiments/experiments.hpp"
