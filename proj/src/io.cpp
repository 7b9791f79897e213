#include "numstress/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace numstress {

using nlohmann::json;

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
  return j;
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

Tensor tensor_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw SchemaError(where + ": expected an array");
  Tensor t;
  if (!j.empty() && j[0].is_array()) {
    std::vector<std::vector<double>> rows;
    for (const auto& row : j) {
      if (!row.is_array())
        throw SchemaError(where + ": mixed nesting in matrix");
      std::vector<double> r;
      for (const auto& v : row) {
        if (!v.is_number())
          throw SchemaError(where + ": matrix entries must be numbers");
        r.push_back(v.get<double>());
      }
      rows.push_back(std::move(r));
    }
    try {
      t = Tensor::matrix(std::move(rows));
    } catch (const std::invalid_argument& e) {
      throw SchemaError(where + ": " + e.what());
    }
  } else {
    std::vector<double> v;
    for (const auto& e : j) {
      if (!e.is_number())
        throw SchemaError(where + ": entries must be numbers");
      v.push_back(e.get<double>());
    }
    t = Tensor::vector(std::move(v));
  }
  return t;
}

json tensor_to_json(const Tensor& t) {
  if (t.shape.size() == 2) {
    json rows = json::array();
    for (std::size_t r = 0; r < t.shape[0]; ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < t.shape[1]; ++c) row.push_back(t.at(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  }
  json v = json::array();
  for (double e : t.values) v.push_back(e);
  return v;
}

}  // namespace

Tensor load_tensor(const std::string& path) {
  if (has_suffix(path, ".csv")) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    std::vector<double> v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      try {
        const std::string cell = line.substr(first);
        std::size_t used = 0;
        const double d = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
          throw std::invalid_argument("trailing characters");
        v.push_back(d);
      } catch (const std::exception&) {
        std::ostringstream os;
        os << path << ":" << lineno << ": not a number: '" << line << "'";
        throw SchemaError(os.str());
      }
    }
    return Tensor::vector(std::move(v));
  }
  return tensor_from_json(parse_file(path), path);
}

void save_tensor_json(const Tensor& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << tensor_to_json(t).dump(2) << '\n';
}

ModelSpec load_model_spec(const std::string& path) {
  const json j = parse_file(path);
  if (!j.is_object()) throw SchemaError(path + ": expected an object");
  if (!j.contains("input_dim") || !j["input_dim"].is_number_unsigned())
    throw SchemaError(path + ": 'input_dim' must be a positive integer");
  if (!j.contains("layers") || !j["layers"].is_array())
    throw SchemaError(path + ": 'layers' must be an array");

  ModelSpec spec;
  spec.input_dim = j["input_dim"].get<std::size_t>();

  std::size_t li = 0;
  for (const auto& lj : j["layers"]) {
    std::ostringstream where;
    where << path << ": layers[" << li << "]";
    if (!lj.is_object() || !lj.contains("type") || !lj["type"].is_string())
      throw SchemaError(where.str() + ": needs a string 'type'");
    ModelLayer L;
    L.type = lj["type"].get<std::string>();
    if (lj.contains("weights")) {
      L.weights = tensor_from_json(lj["weights"], where.str() + ".weights");
      L.has_weights = true;
    }
    if (lj.contains("bias")) {
      L.bias = tensor_from_json(lj["bias"], where.str() + ".bias");
      L.has_bias = true;
    }
    for (const auto& [key, _] : lj.items())
      if (key != "type" && key != "weights" && key != "bias")
        throw SchemaError(where.str() + ": unknown key '" + key + "'");
    spec.layers.push_back(std::move(L));
    ++li;
  }

  if (j.contains("output_ids")) {
    if (!j["output_ids"].is_array())
      throw SchemaError(path + ": 'output_ids' must be an array");
    for (const auto& o : j["output_ids"]) {
      if (!o.is_number_unsigned())
        throw SchemaError(path + ": output ids must be non-negative integers");
      spec.output_ids.push_back(o.get<std::size_t>());
    }
  }
  for (const auto& [key, _] : j.items())
    if (key != "input_dim" && key != "layers" && key != "output_ids")
      throw SchemaError(path + ": unknown key '" + key + "'");
  return spec;
}

void save_model_spec(const ModelSpec& spec, const std::string& path) {
  json j;
  j["input_dim"] = spec.input_dim;
  j["layers"] = json::array();
  for (const auto& L : spec.layers) {
    json lj;
    lj["type"] = L.type;
    if (L.has_weights) lj["weights"] = tensor_to_json(L.weights);
    if (L.has_bias) lj["bias"] = tensor_to_json(L.bias);
    j["layers"].push_back(std::move(lj));
  }
  if (!spec.output_ids.empty()) j["output_ids"] = spec.output_ids;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

Graph load_model(const std::string& path) {
  const ModelSpec spec = load_model_spec(path);
  try {
    return build_from_spec(spec);
  } catch (const std::runtime_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

CsvWriter::CsvWriter(std::ostream& os, const std::string& config_comment,
                     const std::vector<std::string>& header)
    : os_(os), columns_(header.size()) {
  os_ << "# " << TOOL_NAME << ' ' << TOOL_VERSION;
  if (!config_comment.empty()) os_ << "; " << config_comment;
  os_ << '\n';
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_)
    throw std::invalid_argument("CsvWriter: wrong column count");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os_ << ',';
    os_ << cells[i];
  }
  os_ << '\n';
}

std::string attack_report_to_json(const AttackReport& rep) {
  json j;
  j["config"] = {
      {"format", rep.config.format},
      {"accumulation", accumulation_name(rep.config.accumulation)},
      {"epsilon", rep.config.epsilon},
      {"alpha", rep.config.alpha},
      {"iterations", rep.config.iterations},
      {"optimizer", optimizer_name(rep.config.optimizer)},
      {"domain", {rep.config.domain_lo, rep.config.domain_hi}},
      {"seed", rep.config.seed},
  };
  if (rep.config.optimizer == Optimizer::adaptive_moment) {
    j["config"]["adaptive"] = {{"beta1", rep.config.adaptive.beta1},
                               {"beta2", rep.config.adaptive.beta2},
                               {"eps", rep.config.adaptive.eps},
                               {"weight_decay", rep.config.adaptive.weight_decay}};
  }
  j["final_delta"] = rep.delta.values;
  j["initial_loss"] = rep.initial_loss;
  j["final_loss"] = rep.final_loss;
  j["loss_history"] = rep.loss_history;
  j["diff_history"] = rep.diff_history;
  j["events"] = rep.events;
  return j.dump(2);
}

void save_attack_report(const AttackReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << attack_report_to_json(rep) << '\n';
}

}  // namespace numstress
