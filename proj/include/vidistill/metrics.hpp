// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace vidistill {

/// Append-only JSON-lines log, flushed per record so the file is readable
/// while a run is live. Steps must be strictly increasing.
class MetricsLog {
public:
  explicit MetricsLog(const std::string& path, bool append = true);

  void append(const nlohmann::json& record);
  const std::string& path() const { return path_; }

  static std::vector<nlohmann::json> read(const std::string& path);

private:
  std::string path_;
  std::ofstream out_;
  int64_t last_step_ = -1;
};

}  // namespace vidistill
