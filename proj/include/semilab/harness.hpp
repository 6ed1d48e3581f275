#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "semilab/tail_curve.hpp"

namespace semilab::harness {

using Json = nlohmann::ordered_json;

struct GridSpec {
  double start = 0.0, stop = 0.0;
  std::size_t count = 0;
  bool log_scale = false;

  std::vector<double> values() const;
  static GridSpec parse(const Json& j);
  Json to_json() const;
};

struct ExperimentConfig {
  std::string experiment_id;
  Json parameters = Json::object();
  std::uint64_t seed = 42;
  std::string output_dir = "out";
  std::map<std::string, GridSpec> grids;
};

// validates against the registry: known id, known parameter names with matching JSON types, well-formed grids
ExperimentConfig parse_config(const Json& j, const std::string& experiment_id = "");
Json config_to_json(const ExperimentConfig& c);
// FNV-1a of the canonical JSON of the fully resolved config (defaults filled in)
std::uint64_t config_hash(const ExperimentConfig& c);

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row);
};

enum class Verdict { Pass, Fail, Exploratory };
std::string verdict_name(Verdict v);

struct ExperimentResult {
  std::string experiment_id;
  Table table;
  std::vector<TailCurve> curves;
  Json metadata = Json::object();
  Verdict verdict = Verdict::Pass;
  std::optional<std::size_t> first_violation;  // row index into table
  std::string message;
};

struct ExperimentInfo {
  std::string id;
  std::string statement;
  bool stochastic = false;
  std::vector<std::string> columns;
  Json defaults;                          // parameter defaults
  std::map<std::string, GridSpec> grids;  // grid defaults
  std::function<ExperimentResult(const ExperimentConfig&)> run;
};

const std::vector<ExperimentInfo>& registry();
const ExperimentInfo& find_experiment(const std::string& id);

// config with parameter and grid defaults filled in
ExperimentConfig resolve(const ExperimentConfig& c);
ExperimentResult run(const ExperimentConfig& c);

std::string format_double(double v);
std::string to_csv(const Table& t);
Json table_to_json(const Table& t);
Table table_from_json(const Json& j);
std::string tail_curve_csv(const TailCurve& c);

enum class Format { Csv, Json };
// writes <id>.csv or <id>.json, <id>.meta.json and one <id>.curve<k>.csv per tail curve; returns the paths
std::vector<std::string> emit(const ExperimentResult& r, const std::string& dir, Format f);

int exit_code(Verdict v);

}  // namespace semilab::harness
