#pragma once

#include "duodet/core/box.hpp"
#include "duodet/core/draw.hpp"
#include "duodet/core/error.hpp"
#include "duodet/core/image.hpp"
#include "duodet/core/image_io.hpp"
#include "duodet/core/manifest.hpp"
#include "duodet/core/sample.hpp"
#include "duodet/ingest/ingest.hpp"
#include "duodet/augment/config.hpp"
#include "duodet/augment/geometric.hpp"
#include "duodet/augment/photometric.hpp"
#include "duodet/augment/pipeline.hpp"
#include "duodet/augment/rng.hpp"
#include "duodet/nn/ops.hpp"
#include "duodet/nn/tape.hpp"
#include "duodet/nn/tensor.hpp"
#include "duodet/model/backbone.hpp"
#include "duodet/model/checkpoint.hpp"
#include "duodet/model/config.hpp"
#include "duodet/model/fusion.hpp"
#include "duodet/model/heads.hpp"
#include "duodet/model/model.hpp"
#include "duodet/model/params.hpp"
#include "duodet/traineval/config.hpp"
#include "duodet/traineval/dataset.hpp"
#include "duodet/traineval/detections.hpp"
#include "duodet/traineval/inference.hpp"
#include "duodet/traineval/metrics.hpp"
#include "duodet/traineval/nms.hpp"
#include "duodet/traineval/trainer.hpp"
#include "duodet/ensemble/wbf.hpp"
#include "duodet/cli/config_io.hpp"
#include "duodet/cli/app.hpp"
#include "duodet/synthetic.hpp"
