#pragma once

#include <filesystem>
#include <vector>

#include "nellcom/aggregate.hpp"

namespace nellcom {

// Mean +/- sd timelines for accuracies, order/marking proportions and
// conditional marking, SL and RL phases side by side. One grammar per file.
void plot_timelines(const AggregateResult& agg, const std::filesystem::path& out_svg);

// Small multiples: one per-seed panel of stacked production-class shares
// across the communication phase.
void plot_individuals(const std::vector<RunArtifacts>& runs,
                      const std::filesystem::path& out_svg);

// Uncertainty vs effort scatter: initial diamonds, per-pair open circles and
// per-grammar mean filled circles.
void plot_tradeoff(const std::vector<AggregateResult>& aggs,
                   const std::filesystem::path& out_svg);

}  // namespace nellcom
