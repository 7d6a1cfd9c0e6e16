#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hetcop/data_model.hpp"

using namespace hetcop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name, const std::string& contents) {
  const fs::path dir = fs::temp_directory_path() / "hetcop_unit";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << contents;
  return p;
}

Schema schema_of(const std::string& json) { return parse_schema(nlohmann::json::parse(json)); }

}  // namespace

TEST_CASE("groups are partitioned by label in first-appearance order") {
  const auto p = scratch("groups.csv", "g,x\nA,0.5\nA,1.5\nB,2.5\n");
  const MixedDataset ds = load_dataset(p.string(), {}, "g");
  REQUIRE(ds.num_groups() == 2);
  CHECK(ds.group_labels == std::vector<std::string>{"A", "B"});
  CHECK(ds.group_sizes() == std::vector<std::size_t>{2, 1});
  CHECK(ds.total_rows() == 3);
}

TEST_CASE("binary value outside its declared range is rejected") {
  const auto p = scratch("badbin.csv", "g,b\nA,0\nA,1\nA,2\n");
  try {
    load_dataset(p.string(), schema_of(R"({"b": "binary"})"), "g");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("value out of declared range") != std::string::npos);
  }
}

TEST_CASE("missing markers become missing cells") {
  const auto p = scratch("missing.csv", "g,x,y\nA,1.0,1\nA,2.5,0\nA,NA,1\nA,,0\nA,nan,1\n");
  const MixedDataset ds = load_dataset(p.string(), schema_of(R"({"x": "continuous"})"), "g");
  const auto& g = ds.groups[0];
  CHECK(g(0, 0) == 1.0);
  CHECK(g(1, 0) == 2.5);
  CHECK(is_missing(g(2, 0)));
  CHECK(is_missing(g(3, 0)));
  CHECK(is_missing(g(4, 0)));
  CHECK(ds.kinds[1].tag == VariableTag::binary);
}

TEST_CASE("tab-delimited files are detected from the header") {
  const auto p = scratch("tabs.tsv", "g\tx\ty\nA\t0.1\t3\nB\t0.2\t4\nB\t0.7\t5\n");
  const MixedDataset ds = load_dataset(p.string(), {}, "g");
  CHECK(ds.variables == std::vector<std::string>{"x", "y"});
  CHECK(ds.groups[1](1, 1) == 5.0);
}

TEST_CASE("schema column absent from the file is named in the error") {
  const auto p = scratch("noschema.csv", "g,x\nA,1\nA,2\n");
  try {
    load_dataset(p.string(), schema_of(R"({"height": "continuous"})"), "g");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("height") != std::string::npos);
  }
}

TEST_CASE("unknown group column is rejected") {
  const auto p = scratch("nogroup.csv", "g,x\nA,1\nA,2\n");
  CHECK_THROWS_AS(load_dataset(p.string(), {}, "season"), ValidationError);
}

TEST_CASE("a column constant in every group is rejected") {
  const auto p = scratch("constant.csv", "g,x,y\nA,1,0.3\nA,1,0.4\nB,1,0.5\n");
  CHECK_THROWS_AS(load_dataset(p.string(), {}, "g"), ValidationError);
}

TEST_CASE("kind inference follows the contiguity rule") {
  CHECK(infer_variable_kind({0, 1, 1, 0}).tag == VariableTag::binary);
  CHECK(infer_variable_kind({3, 7, 12, 44}).tag == VariableTag::count);
  CHECK(infer_variable_kind({1.2, 3.4}).tag == VariableTag::continuous);
  const VariableKind ord = infer_variable_kind({0, 1, 2, 3, 2});
  CHECK(ord.tag == VariableTag::ordinal);
  CHECK(ord.levels == 4);
  std::vector<double> many;
  for (int i = 0; i < 15; ++i) many.push_back(i);
  CHECK(infer_variable_kind(many).tag == VariableTag::count);
}

TEST_CASE("kind inference ignores row order") {
  std::vector<double> col = {0, 2, 1, 1, 3, 0, NAN, 2};
  const VariableKind a = infer_variable_kind(col);
  std::reverse(col.begin(), col.end());
  std::rotate(col.begin(), col.begin() + 3, col.end());
  const VariableKind b = infer_variable_kind(col);
  CHECK(a.tag == b.tag);
  CHECK(a.levels == b.levels);
}

TEST_CASE("schema parsing accepts both string and object forms") {
  const Schema s = schema_of(R"({"a": "binary", "b": {"kind": "ordinal", "levels": 5}, "c": "count"})");
  CHECK(s.at("a").tag == VariableTag::binary);
  CHECK(s.at("b").levels == 5);
  CHECK(s.at("c").tag == VariableTag::count);
  CHECK_THROWS_AS(schema_of(R"({"a": "ordinal_ish"})"), ValidationError);
  CHECK_THROWS_AS(schema_of(R"({"a": {"kind": "ordinal", "levels": 1}})"), ValidationError);
}

TEST_CASE("writing and reloading a dataset is cell-exact") {
  const auto p = scratch("roundtrip.csv",
                         "site,y,k,c,o\n"
                         "north,0.1234567890123,1,3,0\n"
                         "north,-2.5e-7,0,NA,2\n"
                         "south,NA,1,17,1\n"
                         "south,3.75,0,0,NA\n");
  const Schema schema = schema_of(R"({"o": {"kind": "ordinal", "levels": 3}})");
  const MixedDataset ds = load_dataset(p.string(), schema, "site");
  std::ostringstream out;
  write_dataset(ds, out, "site");
  const auto p2 = scratch("roundtrip2.csv", out.str());
  const MixedDataset back = load_dataset(p2.string(), schema, "site");
  REQUIRE(back.num_groups() == ds.num_groups());
  CHECK(back.variables == ds.variables);
  for (std::size_t k = 0; k < ds.num_groups(); ++k) {
    REQUIRE(back.groups[k].rows() == ds.groups[k].rows());
    for (Eigen::Index i = 0; i < ds.groups[k].rows(); ++i)
      for (Eigen::Index j = 0; j < ds.groups[k].cols(); ++j) {
        const double a = ds.groups[k](i, j), b = back.groups[k](i, j);
        CHECK((is_missing(a) ? is_missing(b) : a == b));
      }
  }
}

TEST_CASE("shared ordinal levels are the maximum over groups") {
  const auto p = scratch("levels.csv", "g,o\nA,0\nA,1\nB,0\nB,4\n");
  const MixedDataset ds = load_dataset(p.string(), schema_of(R"({"o": "ordinal"})"), "g");
  CHECK(ds.kinds[0].levels == 5);
}
