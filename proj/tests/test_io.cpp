#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "numstress/io.hpp"

using namespace numstress;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / "numstress_io_test";
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("g17 formatting round-trips binary64 exactly") {
  CHECK(format_g17(1.0) == "1");
  CHECK(format_g17(0.1) == "0.10000000000000001");
  CHECK(format_g17(-0.0) == "-0");

  for (double v : {6.109476089477539e-07, 16.0 / 255.0, 0.0999755859375,
                   1e300, -3.3895313892515355e+38, 2.2250738585072014e-308}) {
    const std::string s = format_g17(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("csv tensors: one value per line, comments and blanks skipped") {
  TempDir tmp;
  const std::string path = tmp.file("x.csv");
  write_file(path,
             "# input vector\n"
             "0.5\n"
             "\n"
             "  -1.25\n"
             "1e-3\n");
  const Tensor t = load_tensor(path);
  REQUIRE(t.shape == std::vector<std::size_t>{3});
  CHECK(t.values[0] == 0.5);
  CHECK(t.values[1] == -1.25);
  CHECK(t.values[2] == 1e-3);
}

TEST_CASE("csv tensors: malformed lines carry the line number") {
  TempDir tmp;
  const std::string path = tmp.file("bad.csv");
  write_file(path, "0.5\n1.5abc\n");
  try {
    load_tensor(path);
    FAIL("expected rejection");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }

  CHECK_THROWS_AS(load_tensor(tmp.file("missing.csv")), SchemaError);
}

TEST_CASE("json tensors: flat arrays and matrices") {
  TempDir tmp;
  const std::string vpath = tmp.file("v.json");
  write_file(vpath, "[1.0, 2.5, -3.0]");
  const Tensor v = load_tensor(vpath);
  CHECK(v.shape == std::vector<std::size_t>{3});
  CHECK(v.values[1] == 2.5);

  const std::string mpath = tmp.file("m.json");
  write_file(mpath, "[[1, 2, 3], [4, 5, 6]]");
  const Tensor m = load_tensor(mpath);
  CHECK(m.shape == std::vector<std::size_t>{2, 3});
  CHECK(m.at(1, 2) == 6.0);

  write_file(tmp.file("ragged.json"), "[[1, 2], [3]]");
  CHECK_THROWS_AS(load_tensor(tmp.file("ragged.json")), SchemaError);
  write_file(tmp.file("mixed.json"), "[[1, 2], 3]");
  CHECK_THROWS_AS(load_tensor(tmp.file("mixed.json")), SchemaError);
  write_file(tmp.file("strings.json"), "[\"one\"]");
  CHECK_THROWS_AS(load_tensor(tmp.file("strings.json")), SchemaError);
  write_file(tmp.file("broken.json"), "[1, 2");
  CHECK_THROWS_AS(load_tensor(tmp.file("broken.json")), SchemaError);
}

TEST_CASE("tensor save/load round-trip preserves every bit") {
  TempDir tmp;
  const Tensor v = Tensor::vector({0.1, 6.109476089477539e-07, -0.0, 1e300});
  const std::string path = tmp.file("roundtrip.json");
  save_tensor_json(v, path);
  const Tensor back = load_tensor(path);
  REQUIRE(back.shape == v.shape);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(back.values[i] == v.values[i]);

  const Tensor m = Tensor::matrix({{1.0, 0.1}, {2.0, -0.25}});
  save_tensor_json(m, path);
  const Tensor mb = load_tensor(path);
  CHECK(mb.shape == m.shape);
  CHECK(mb.at(1, 1) == -0.25);
}

TEST_CASE("model files: load, strictness, and round-trip") {
  TempDir tmp;
  const std::string path = tmp.file("model.json");

  SUBCASE("a two-layer model loads and builds") {
    write_file(path,
               "{\"input_dim\": 2, \"layers\": ["
               "{\"type\": \"affine\", \"weights\": [[1, 2], [3, 4]],"
               " \"bias\": [0.5, -0.5]},"
               "{\"type\": \"tanh\"}]}");
    const Graph g = load_model(path);
    CHECK(g.nodes.size() == 4);  // input, matmul, add, tanh
    CHECK(g.operation_count() == 3);
  }

  SUBCASE("unknown keys are rejected at both levels") {
    write_file(path, "{\"input_dim\": 2, \"layers\": [], \"epochs\": 5}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
    write_file(path,
               "{\"input_dim\": 2, \"layers\": ["
               "{\"type\": \"tanh\", \"activation\": \"x\"}]}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
  }

  SUBCASE("missing or malformed fields are schema errors") {
    write_file(path, "{\"layers\": []}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
    write_file(path, "{\"input_dim\": -2, \"layers\": []}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
    write_file(path, "{\"input_dim\": 2, \"layers\": [{\"weights\": []}]}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
    write_file(path, "{\"input_dim\": 2, \"layers\": {}}");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
    write_file(path, "[1, 2, 3]");
    CHECK_THROWS_AS(load_model_spec(path), SchemaError);
  }

  SUBCASE("semantic build failures surface as schema errors too") {
    write_file(path,
               "{\"input_dim\": 2, \"layers\": [{\"type\": \"gelu\"}]}");
    CHECK_THROWS_AS(load_model(path), SchemaError);
  }

  SUBCASE("write/read round-trip") {
    ModelSpec spec;
    spec.input_dim = 3;
    ModelLayer a;
    a.type = "affine";
    a.has_weights = true;
    a.weights = Tensor::matrix({{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}});
    a.has_bias = true;
    a.bias = Tensor::vector({1.0, -1.0});
    ModelLayer t;
    t.type = "relu";
    spec.layers = {a, t};
    save_model_spec(spec, path);

    const ModelSpec back = load_model_spec(path);
    CHECK(back.input_dim == 3);
    REQUIRE(back.layers.size() == 2);
    CHECK(back.layers[0].type == "affine");
    CHECK(back.layers[0].weights.at(1, 2) == 0.6);
    CHECK(back.layers[0].bias.values[1] == -1.0);
    CHECK(back.layers[1].type == "relu");
    CHECK_FALSE(back.layers[1].has_weights);
  }
}

TEST_CASE("csv writer: versioned comment, header, and column discipline") {
  std::ostringstream os;
  CsvWriter w(os, "cmd=demo seed=7", {"a", "b"});
  w.row({CsvWriter::cell(0.1), CsvWriter::cell(std::size_t{3})});
  CHECK(os.str() ==
        "# numstress 0.1.0; cmd=demo seed=7\n"
        "a,b\n"
        "0.10000000000000001,3\n");

  CHECK_THROWS_AS(w.row({"only-one"}), std::invalid_argument);
}

TEST_CASE("attack reports serialize with history and config") {
  Graph g;
  g.input_shape = {1};
  g.nodes.push_back(Node{0, NodeKind::input, {}, {}});
  g.nodes.push_back(Node{1, NodeKind::tanh, {0}, {}});
  g.outputs = {1};

  AttackConfig cfg;
  cfg.iterations = 2;
  const AttackReport rep = run_attack(g, Tensor::vector({0.5}), cfg);
  const std::string js = attack_report_to_json(rep);
  CHECK(js.find("\"loss_history\"") != std::string::npos);
  CHECK(js.find("\"final_delta\"") != std::string::npos);
  CHECK(js.find("\"optimizer\": \"sign_ascent\"") != std::string::npos);

  TempDir tmp;
  const std::string path = tmp.file("report.json");
  save_attack_report(rep, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == js + "\n");
}
