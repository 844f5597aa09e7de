#include "metrics/report_io.hpp"

#include "common/errors.hpp"

namespace ibac {

namespace {

nlohmann::json matrix_json(const DenseMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

DenseMatrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols) {
  DenseMatrix m(rows, cols);
  if (!j.is_array() || j.size() != rows) throw FormatError("report matrix has wrong row count");
  for (std::size_t r = 0; r < rows; ++r) {
    const auto v = j[r].get<std::vector<double>>();
    if (v.size() != cols) throw FormatError("report matrix has wrong column count");
    std::copy(v.begin(), v.end(), m.row(r).begin());
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const BinningConfig& b) {
  nlohmann::json j = {{"n_bins", b.n_bins},
                      {"range_mode", b.range_mode == RangeMode::Fixed ? "fixed" : "per_channel_min_max"}};
  if (b.range_mode == RangeMode::Fixed) {
    j["lo"] = b.lo;
    j["hi"] = b.hi;
  }
  return j;
}

BinningConfig binning_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("binning: expected an object");
  BinningConfig b;
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "n_bins" && key != "range_mode" && key != "lo" && key != "hi") {
        throw ConfigError("binning." + key + ": unknown field");
      }
    }
    if (j.contains("n_bins")) b.n_bins = j.at("n_bins").get<std::size_t>();
    if (j.contains("range_mode")) {
      const auto mode = j.at("range_mode").get<std::string>();
      if (mode == "fixed") {
        b.range_mode = RangeMode::Fixed;
      } else if (mode != "per_channel_min_max") {
        throw ConfigError("binning.range_mode: unknown mode '" + mode + "'");
      }
    }
    if (j.contains("lo")) b.lo = j.at("lo").get<double>();
    if (j.contains("hi")) b.hi = j.at("hi").get<double>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("binning: wrong field type");
  }
  validate(b);
  return b;
}

CsvTable report_to_csv(const AlignmentReport& r) {
  CsvTable t;
  t.header = {"i", "j", "abs_pearson", "mi_nats", "h_nats", "ratio", "degenerate_flag"};
  for (std::size_t i = 0; i < r.d_z; ++i) {
    for (std::size_t j = 0; j < r.d_a; ++j) {
      t.rows.push_back({std::to_string(i), std::to_string(j), format_double(r.pearson_abs(i, j)),
                        format_double(r.mi_nats(i, j)), format_double(r.entropy[j]), format_double(r.mi_ratio(i, j)),
                        r.cell_degenerate(i, j) ? "1" : "0"});
    }
  }
  return t;
}

nlohmann::json report_to_json(const AlignmentReport& r) {
  return {{"d_z", r.d_z},
          {"d_a", r.d_a},
          {"n", r.n},
          {"binning", to_json(r.binning)},
          {"pearson_abs", matrix_json(r.pearson_abs)},
          {"mi_nats", matrix_json(r.mi_nats)},
          {"mi_ratio", matrix_json(r.mi_ratio)},
          {"degenerate", r.degenerate},
          {"entropy", r.entropy},
          {"channel_degenerate", r.channel_degenerate},
          {"max_pearson_per_channel", r.max_pearson_per_channel},
          {"max_ratio_per_channel", r.max_ratio_per_channel},
          {"mean_max_pearson", r.mean_max_pearson()},
          {"mean_max_ratio", r.mean_max_ratio()}};
}

AlignmentReport report_from_json(const nlohmann::json& j) {
  AlignmentReport r;
  try {
    r.d_z = j.at("d_z").get<std::size_t>();
    r.d_a = j.at("d_a").get<std::size_t>();
    r.n = j.at("n").get<std::size_t>();
    r.binning = binning_from_json(j.at("binning"));
    r.pearson_abs = matrix_from_json(j.at("pearson_abs"), r.d_z, r.d_a);
    r.mi_nats = matrix_from_json(j.at("mi_nats"), r.d_z, r.d_a);
    r.mi_ratio = matrix_from_json(j.at("mi_ratio"), r.d_z, r.d_a);
    r.degenerate = j.at("degenerate").get<std::vector<std::uint8_t>>();
    r.entropy = j.at("entropy").get<std::vector<double>>();
    r.channel_degenerate = j.at("channel_degenerate").get<std::vector<std::uint8_t>>();
    r.max_pearson_per_channel = j.at("max_pearson_per_channel").get<std::vector<double>>();
    r.max_ratio_per_channel = j.at("max_ratio_per_channel").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  if (r.degenerate.size() != r.d_z * r.d_a || r.entropy.size() != r.d_a || r.channel_degenerate.size() != r.d_a ||
      r.max_pearson_per_channel.size() != r.d_a || r.max_ratio_per_channel.size() != r.d_a) {
    throw FormatError("malformed report: vector sizes disagree with d_z/d_a");
  }
  return r;
}

}  // namespace ibac
