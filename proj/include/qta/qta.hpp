// Copyright 2026 The qta Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "qta/aligner.hpp"
#include "qta/analytics.hpp"
#include "qta/errors.hpp"
#include "qta/metrics.hpp"
#include "qta/pipeline.hpp"
#include "qta/scoring.hpp"
#include "qta/service_clients.hpp"
#include "qta/squad_io.hpp"
#include "qta/textcore.hpp"
#include "qta/unicode.hpp"
