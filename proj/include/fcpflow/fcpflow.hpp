#pragma once

#include "fcpflow/array.hpp"
#include "fcpflow/autodiff.hpp"
#include "fcpflow/data/csv.hpp"
#include "fcpflow/data/dataset.hpp"
#include "fcpflow/data/scaler.hpp"
#include "fcpflow/data/synth.hpp"
#include "fcpflow/data/transforms.hpp"
#include "fcpflow/errors.hpp"
#include "fcpflow/flow/coupling.hpp"
#include "fcpflow/flow/linear.hpp"
#include "fcpflow/flow/mlp.hpp"
#include "fcpflow/flow/model.hpp"
#include "fcpflow/flow/normalization.hpp"
#include "fcpflow/linalg.hpp"
#include "fcpflow/metrics.hpp"
#include "fcpflow/train/checkpoint.hpp"
#include "fcpflow/train/optimizer.hpp"
#include "fcpflow/train/trainer.hpp"
