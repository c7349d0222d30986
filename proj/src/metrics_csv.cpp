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

#include "semx/metrics_csv.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "semx/errors.hpp"

namespace semx {
namespace {

std::string real(double v) {
  char buf[40];
  for (int prec = 9; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_real(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw FormatError("bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_metrics_row(const MetricsRecord& r) {
  return std::to_string(r.epoch) + "," + r.split + "," + real(r.loss_total) + "," +
         real(r.loss_label) + "," + real(r.loss_sem) + "," + real(r.accuracy);
}

MetricsRecord parse_metrics_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (cells.size() != 6) {
    throw FormatError("expected 6 fields, got " + std::to_string(cells.size()));
  }
  MetricsRecord r;
  std::size_t epoch = 0;
  auto [p, ec] = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), epoch);
  if (ec != std::errc() || p != cells[0].data() + cells[0].size()) {
    throw FormatError("bad epoch '" + cells[0] + "'");
  }
  r.epoch = epoch;
  r.split = cells[1];
  r.loss_total = parse_real(cells[2]);
  r.loss_label = parse_real(cells[3]);
  r.loss_sem = parse_real(cells[4]);
  r.accuracy = parse_real(cells[5]);
  return r;
}

MetricsCsvWriter::MetricsCsvWriter(const std::string& path) : path_(path) {
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw UsageError("cannot write '" + path + "'");
  out_ << kMetricsHeader << '\n';
  out_.flush();
}

void MetricsCsvWriter::append(const MetricsRecord& record) {
  out_ << format_metrics_row(record) << '\n';
  out_.flush();
  if (!out_) throw UsageError("write failed for '" + path_ + "'");
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError(path + ":1: unexpected header '" + line + "'");
  }
  std::vector<MetricsRecord> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(parse_metrics_row(line));
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace semx
