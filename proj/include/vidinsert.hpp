// Copyright 2026 The vidinsert Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Umbrella header.

#ifndef VIDINSERT_VIDINSERT_HPP_
#define VIDINSERT_VIDINSERT_HPP_

#include "vidinsert/attention.hpp"
#include "vidinsert/backprop.hpp"
#include "vidinsert/checkpoint.hpp"
#include "vidinsert/error.hpp"
#include "vidinsert/flow.hpp"
#include "vidinsert/gaussian_field.hpp"
#include "vidinsert/guidance.hpp"
#include "vidinsert/matrix.hpp"
#include "vidinsert/metrics.hpp"
#include "vidinsert/model.hpp"
#include "vidinsert/pipeline.hpp"
#include "vidinsert/rng.hpp"
#include "vidinsert/synthbench.hpp"
#include "vidinsert/tensor_io.hpp"
#include "vidinsert/trainer.hpp"
#include "vidinsert/video.hpp"

#endif  // VIDINSERT_VIDINSERT_HPP_
