#pragma once

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "numstress/attack.hpp"
#include "numstress/graph.hpp"

namespace numstress {

inline constexpr const char* TOOL_NAME = "numstress";
inline constexpr const char* TOOL_VERSION = "0.1.0";

// Malformed input files (JSON shape, missing fields, bad values). The CLI
// maps this to its schema-error exit code.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest exact decimal: %.17g round-trips every binary64.
std::string format_g17(double v);

// Tensors: .json holds a flat array (vector) or array of arrays (matrix);
// .csv holds one value per line, '#' comments and blank lines skipped.
Tensor load_tensor(const std::string& path);
void save_tensor_json(const Tensor& t, const std::string& path);

// Model description files (JSON: input_dim, layers[], optional output_ids).
ModelSpec load_model_spec(const std::string& path);
void save_model_spec(const ModelSpec& spec, const std::string& path);
Graph load_model(const std::string& path);

// CSV emission: one '#' comment line carrying tool version and run
// configuration, then the header row, then data rows. All floating-point
// cells go through format_g17 so identical runs are byte-identical.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::string& config_comment,
            const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);

  static std::string cell(double v) { return format_g17(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(int v) { return std::to_string(v); }

 private:
  std::ostream& os_;
  std::size_t columns_;
};

std::string attack_report_to_json(const AttackReport& rep);
void save_attack_report(const AttackReport& rep, const std::string& path);

}  // namespace numstress
