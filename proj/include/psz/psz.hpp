// Copyright 2026 The PSZ Toolkit Authors
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

#pragma once

#include "psz/common.hpp"
#include "psz/config.hpp"
#include "psz/dataset_io.hpp"
#include "psz/evaluation.hpp"
#include "psz/metrics.hpp"
#include "psz/room_acoustics.hpp"
#include "psz/scene.hpp"
#include "psz/solver.hpp"
