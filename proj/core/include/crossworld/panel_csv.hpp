#pragma once

#include <string>
#include <vector>

#include "crossworld/panel.hpp"

namespace crossworld {

// Column mapping for long-format panel CSV. One row per (unit, time);
// header row required; times must form 1..T for every unit; '.' decimal
// separator; no quoting (values must not contain commas).
struct CsvColumn {
  std::string name;
  bool one_hot = false;  // expand distinct raw values into indicator columns
};

struct CsvSchema {
  std::string unit_id = "id";
  std::string time = "time";
  std::string treatment = "a";
  std::string outcome = "y";
  std::vector<CsvColumn> covariates;
  // "per_row": outcome repeated (identically) on every row of a unit.
  // "final_time": outcome read from the unit's last-time row only.
  std::string outcome_mode = "per_row";

  static CsvSchema for_dataset(const PanelDataset& data);
};

PanelDataset parse_long_format_csv(const std::string& path, const CsvSchema& schema);

// Writes a validated dataset so that parse_long_format_csv(write(...)) is the
// identity, bitwise on all values (outcome repeated per row).
void write_long_format_csv(const PanelDataset& data, const std::string& path);

}  // namespace crossworld
