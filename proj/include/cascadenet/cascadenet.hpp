#pragma once

// Umbrella header.

#include "cascadenet/core/common.hpp"
#include "cascadenet/core/params.hpp"
#include "cascadenet/data/event.hpp"
#include "cascadenet/data/labels.hpp"
#include "cascadenet/data/legacy.hpp"
#include "cascadenet/data/observe.hpp"
#include "cascadenet/data/split.hpp"
#include "cascadenet/data/stats.hpp"
#include "cascadenet/data/synthetic.hpp"
#include "cascadenet/encoder/backbone.hpp"
#include "cascadenet/encoder/layers.hpp"
#include "cascadenet/encoder/text_encoder.hpp"
#include "cascadenet/eval/evaluate.hpp"
#include "cascadenet/eval/metrics.hpp"
#include "cascadenet/heads/heads.hpp"
#include "cascadenet/model/losses.hpp"
#include "cascadenet/model/model.hpp"
#include "cascadenet/pretrain/user_embeddings.hpp"
#include "cascadenet/trainer/checkpoint.hpp"
#include "cascadenet/trainer/optim.hpp"
#include "cascadenet/trainer/trainer.hpp"
