/* Copyright 2026 The slmmux Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <span>

#include "slmmux/core.hpp"
#include "slmmux/provider.hpp"

namespace slmmux {

/// Modal answer of one model's samples and its frequency among all k
/// samples. Failed extractions stay in the denominator.
ModelVerdict estimate_confidence(const SampleSet& samples,
                                 TaskKind task_kind = TaskKind::kFreeMath);

/// Picks the most self-consistent model. Ties on confidence go to the
/// higher validation accuracy, then to the smaller display_order.
/// Throws NoAnswerError when no verdict carries an answer and ConfigError
/// when a verdict has no matching profile.
MuxDecision select_output(std::span<const ModelVerdict> verdicts,
                          std::span<const ModelProfile> profiles);

/// Verdicts for `models` from an already sampled grid, in profile order.
std::vector<ModelVerdict> verdicts_for(const SampleGrid& grid,
                                       const Query& query,
                                       std::span<const ModelProfile> models);

/// fan_out -> estimate_confidence per model -> select_output.
MuxDecision run_mux(const ProviderClient& client, const Query& query,
                    std::span<const ModelProfile> models,
                    const SamplingConfig& sampling);

}  // namespace slmmux
