// SPDX-License-Identifier: Apache-2.0
//
// ota-fronthaul: over-the-air aggregation of sufficient statistics for
// uplink cell-free massive MIMO
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef OTA_OTA_HPP
#define OTA_OTA_HPP

#include "ota/types.hpp"
#include "ota/linalg.hpp"
#include "ota/scenario.hpp"
#include "ota/channel.hpp"
#include "ota/ap_local.hpp"
#include "ota/moments.hpp"
#include "ota/power.hpp"
#include "ota/fronthaul.hpp"
#include "ota/detect.hpp"
#include "ota/perf.hpp"
#include "ota/ods.hpp"
#include "ota/parallel.hpp"
#include "ota/pipeline.hpp"
#include "ota/config.hpp"
#include "ota/experiments.hpp"

#endif // OTA_OTA_HPP
