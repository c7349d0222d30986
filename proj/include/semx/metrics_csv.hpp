// Copyright 2026 The SEMX Authors. All rights reserved.
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

#ifndef SEMX_METRICS_CSV_HPP_
#define SEMX_METRICS_CSV_HPP_

#include <fstream>
#include <string>
#include <vector>

#include "semx/training.hpp"

namespace semx {

inline constexpr const char* kMetricsHeader =
    "epoch,split,loss_total,loss_label,loss_sem,accuracy";

/// One CSV row, no newline. Reals use the shortest round-trip form.
std::string format_metrics_row(const MetricsRecord& record);
MetricsRecord parse_metrics_row(const std::string& line);

/// Append-only writer: the header goes out on open, each row is flushed as
/// it is appended.
class MetricsCsvWriter {
 public:
  explicit MetricsCsvWriter(const std::string& path);
  void append(const MetricsRecord& record);

 private:
  std::ofstream out_;
  std::string path_;
};

/// FormatError on a wrong header or a malformed row (with its line number).
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

}  // namespace semx

#endif  // SEMX_METRICS_CSV_HPP_
