// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "evtk/augment.hpp"
#include "evtk/config.hpp"
#include "evtk/encode.hpp"
#include "evtk/event_model.hpp"
#include "evtk/io/cache.hpp"
#include "evtk/io/dataset_dir.hpp"
#include "evtk/io/event_io.hpp"
#include "evtk/io/label_io.hpp"
#include "evtk/io/tensor_container.hpp"
#include "evtk/models/knightpupil.hpp"
#include "evtk/models/scaling.hpp"
#include "evtk/models/spatiotemporal.hpp"
#include "evtk/nn/gradcheck.hpp"
#include "evtk/nn/layers.hpp"
#include "evtk/synth.hpp"
#include "evtk/train/pipeline.hpp"
