#pragma once

#include "common/csv.hpp"
#include "metrics/info_metrics.hpp"

#include <json.hpp>

namespace ibac {

// One row per (i, j): i,j,abs_pearson,mi_nats,h_nats,ratio,degenerate_flag
CsvTable report_to_csv(const AlignmentReport& report);
nlohmann::json report_to_json(const AlignmentReport& report);
AlignmentReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BinningConfig& binning);
BinningConfig binning_from_json(const nlohmann::json& j);

}  // namespace ibac
