// SPDX-License-Identifier: Apache-2.0
#include "vidistill/metrics.hpp"

#include <stdexcept>

namespace vidistill {

using nlohmann::json;

MetricsLog::MetricsLog(const std::string& path, bool append) : path_(path) {
  if (append) {
    std::ifstream probe(path);
    if (probe.good()) {
      for (const auto& rec : read(path))
        if (rec.contains("step")) last_step_ = std::max(last_step_, rec["step"].get<int64_t>());
    }
  }
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw std::runtime_error("MetricsLog: cannot open " + path);
}

void MetricsLog::append(const json& record) {
  if (record.contains("step")) {
    int64_t step = record.at("step").get<int64_t>();
    if (step <= last_step_)
      throw std::invalid_argument("MetricsLog: step " + std::to_string(step) +
                                  " not strictly increasing (last " + std::to_string(last_step_) +
                                  ")");
    last_step_ = step;
  }
  out_ << record.dump() << "\n";
  out_.flush();
  if (!out_) throw std::runtime_error("MetricsLog: write failed for " + path_);
}

std::vector<json> MetricsLog::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("MetricsLog: cannot open " + path);
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(json::parse(line));
  }
  return records;
}

}  // namespace vidistill
