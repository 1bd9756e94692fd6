#include "crossworld/panel_csv.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace crossworld {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  if (s.empty()) throw ConfigError("unparseable numeric (empty field), " + context);
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + s.size()) {
    throw ConfigError("unparseable numeric '" + s + "', " + context);
  }
  return v;
}

long parse_integer(const std::string& s, const std::string& context) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (s.empty() || end != begin + s.size()) {
    throw ConfigError("unparseable integer '" + s + "', " + context);
  }
  return v;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct RawRow {
  long time = 0;
  std::vector<std::string> covariate_fields;  // raw strings, pre-encoding
  int treatment = 0;
  double outcome = 0.0;
  bool has_outcome = false;
};

}  // namespace

CsvSchema CsvSchema::for_dataset(const PanelDataset& data) {
  CsvSchema schema;
  for (int j = 0; j < data.covariate_dim; ++j) {
    const std::string name = data.covariate_names.empty()
                                 ? "x" + std::to_string(j + 1)
                                 : data.covariate_names[static_cast<std::size_t>(j)];
    schema.covariates.push_back({name, false});
  }
  return schema;
}

PanelDataset parse_long_format_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open CSV file '" + path + "'");
  if (schema.covariates.empty()) throw ConfigError("schema lists no covariate columns");
  if (schema.outcome_mode != "per_row" && schema.outcome_mode != "final_time") {
    throw ConfigError("schema outcome_mode must be 'per_row' or 'final_time'");
  }

  std::string header_line;
  if (!std::getline(in, header_line)) throw ConfigError("CSV is empty: '" + path + "'");
  const std::vector<std::string> header = split_row(header_line);

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("column '" + name + "' not found");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t id_col = column_index(schema.unit_id);
  const std::size_t time_col = column_index(schema.time);
  const std::size_t a_col = column_index(schema.treatment);
  const std::size_t y_col = column_index(schema.outcome);
  std::vector<std::size_t> x_cols;
  for (const CsvColumn& c : schema.covariates) x_cols.push_back(column_index(c.name));

  // Gather rows per unit, preserving first-appearance order of units.
  std::vector<std::string> unit_order;
  std::map<std::string, std::vector<RawRow>> rows_by_unit;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_row(line);
    if (fields.size() != header.size()) {
      throw ConfigError("row " + std::to_string(line_no) + " has " +
                        std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(header.size()));
    }
    const std::string ctx = "row " + std::to_string(line_no);
    RawRow row;
    const std::string id = fields[id_col];
    row.time = parse_integer(fields[time_col], ctx + ", column '" + schema.time + "'");
    const double a = parse_number(fields[a_col], ctx + ", column '" + schema.treatment + "'");
    if (!is_binary(a)) {
      throw ConfigError("non-binary treatment, unit '" + id + "', t=" +
                        std::to_string(row.time));
    }
    row.treatment = static_cast<int>(a);
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      row.covariate_fields.push_back(fields[x_cols[j]]);
    }
    const std::string& y_field = fields[y_col];
    if (!y_field.empty()) {
      row.outcome = parse_number(y_field, ctx + ", column '" + schema.outcome + "'");
      row.has_outcome = true;
    }
    if (rows_by_unit.find(id) == rows_by_unit.end()) unit_order.push_back(id);
    rows_by_unit[id].push_back(std::move(row));
  }
  if (unit_order.empty()) throw ConfigError("CSV has a header but no data rows");

  // One-hot columns: collect sorted distinct raw values across the file.
  std::vector<std::vector<std::string>> levels(schema.covariates.size());
  for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
    if (!schema.covariates[j].one_hot) continue;
    std::set<std::string> distinct;
    for (const auto& [id, rows] : rows_by_unit) {
      for (const RawRow& r : rows) distinct.insert(r.covariate_fields[j]);
    }
    levels[j].assign(distinct.begin(), distinct.end());
  }

  PanelDataset data;
  for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
    if (schema.covariates[j].one_hot) {
      for (const std::string& lvl : levels[j]) {
        data.covariate_names.push_back(schema.covariates[j].name + "=" + lvl);
      }
    } else {
      data.covariate_names.push_back(schema.covariates[j].name);
    }
  }
  data.covariate_dim = static_cast<int>(data.covariate_names.size());

  int T = -1;
  for (const std::string& id : unit_order) {
    std::vector<RawRow>& rows = rows_by_unit[id];
    std::stable_sort(rows.begin(), rows.end(),
                     [](const RawRow& a, const RawRow& b) { return a.time < b.time; });
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const long expected = static_cast<long>(k) + 1;
      if (rows[k].time == expected) continue;
      if (k > 0 && rows[k].time == rows[k - 1].time) {
        throw ConfigError("duplicate (unit, time): unit '" + id + "', t=" +
                          std::to_string(rows[k].time));
      }
      if (rows[k].time > expected) {
        throw ConfigError("time gap for unit " + id + ": expected t=" +
                          std::to_string(expected) + ", found t=" +
                          std::to_string(rows[k].time));
      }
      throw ConfigError("time index must start at 1, unit '" + id + "', found t=" +
                        std::to_string(rows[k].time));
    }
    if (T < 0) {
      T = static_cast<int>(rows.size());
    } else if (static_cast<int>(rows.size()) != T) {
      throw ConfigError("unit '" + id + "' has " + std::to_string(rows.size()) +
                        " rows, expected T=" + std::to_string(T));
    }

    Trajectory unit;
    bool outcome_set = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const RawRow& r = rows[k];
      Eigen::VectorXd x(data.covariate_dim);
      Eigen::Index pos = 0;
      for (std::size_t j = 0; j < schema.covariates.size(); ++j) {
        if (schema.covariates[j].one_hot) {
          for (const std::string& lvl : levels[j]) {
            x[pos++] = (r.covariate_fields[j] == lvl) ? 1.0 : 0.0;
          }
        } else {
          x[pos++] = parse_number(r.covariate_fields[j], "unit '" + id + "', t=" +
                                  std::to_string(r.time) + ", column '" +
                                  schema.covariates[j].name + "'");
        }
      }
      unit.covariates.push_back(std::move(x));
      unit.treatments.push_back(r.treatment);

      const bool is_final = (k + 1 == rows.size());
      if (schema.outcome_mode == "per_row") {
        if (!r.has_outcome) {
          throw ConfigError("missing outcome, unit '" + id + "', t=" +
                            std::to_string(r.time));
        }
        if (outcome_set && r.outcome != unit.outcome) {
          throw ConfigError("outcome varies within unit '" + id +
                            "' (per_row mode requires a constant outcome column)");
        }
        unit.outcome = r.outcome;
        outcome_set = true;
      } else if (is_final) {
        if (!r.has_outcome) {
          throw ConfigError("missing final-time outcome, unit '" + id + "'");
        }
        unit.outcome = r.outcome;
        outcome_set = true;
      }
    }
    if (!outcome_set) throw ConfigError("no outcome found for unit '" + id + "'");
    data.units.push_back(std::move(unit));
    data.unit_ids.push_back(id);
  }
  data.horizon = T;
  return validate_dataset(data), data;
}

void write_long_format_csv(const PanelDataset& data, const std::string& path) {
  validate_dataset(data);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  const CsvSchema schema = CsvSchema::for_dataset(data);

  out << schema.unit_id << "," << schema.time;
  for (const CsvColumn& c : schema.covariates) out << "," << c.name;
  out << "," << schema.treatment << "," << schema.outcome << "\n";

  for (int i = 0; i < data.n_units(); ++i) {
    const Trajectory& u = data.units[static_cast<std::size_t>(i)];
    const std::string id = data.unit_ids.empty() ? std::to_string(i)
                                                 : data.unit_ids[static_cast<std::size_t>(i)];
    for (int t = 0; t < data.horizon; ++t) {
      out << id << "," << (t + 1);
      for (int j = 0; j < data.covariate_dim; ++j) {
        out << "," << format_value(u.covariates[static_cast<std::size_t>(t)][j]);
      }
      out << "," << u.treatments[static_cast<std::size_t>(t)] << ","
          << format_value(u.outcome) << "\n";
    }
  }
}

}  // namespace crossworld
