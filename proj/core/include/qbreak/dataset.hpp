// Copyright 2026 The qbreak Authors
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

// CSV time series input and output.
#ifndef QBREAK_DATASET_HPP_
#define QBREAK_DATASET_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qbreak/tsgen.hpp"

namespace qbreak {

struct DatasetSpec {
  std::string path;
  std::string response_column;
  std::vector<std::string> predictor_columns;
  std::size_t lag = 1;  // y_t is paired with predictors from row t - lag
  std::optional<std::string> date_column;
  // Smallest accepted aligned sample; unset means d_cols + 11 = p + 12.
  std::optional<std::size_t> min_observations;
};

struct LoadedDataset {
  Sample sample;                 // intercept included
  std::size_t dropped_rows = 0;  // aligned rows removed for missing values
  std::vector<std::string> dates;  // response dates, when a date column is given
};

// Empty cells and NA, NaN, null or "." (any case) count as missing.
// Throws Error(kData) naming a missing column, an unparseable cell, or a
// sample that is too short after alignment.
LoadedDataset load_csv(const DatasetSpec& spec);
LoadedDataset parse_csv(std::istream& in, const DatasetSpec& spec);

// Writes a sample as columns t,y,x1..xp so that load_csv with lag 1
// reproduces it: row 0 carries x_0 and a missing y, the last row carries y_n
// and missing predictors.
void write_sample_csv(const Sample& sample, std::ostream& out);

}  // namespace qbreak

#endif  // QBREAK_DATASET_HPP_
