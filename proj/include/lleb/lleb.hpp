/*
 * Copyright 2026 The lleb Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "lleb/data.hpp"
#include "lleb/embedding.hpp"
#include "lleb/error.hpp"
#include "lleb/harness.hpp"
#include "lleb/metrics.hpp"
#include "lleb/model.hpp"
#include "lleb/random.hpp"
#include "lleb/report.hpp"
#include "lleb/session.hpp"
#include "lleb/snapshot.hpp"
#include "lleb/synth.hpp"
#include "lleb/vocab.hpp"
