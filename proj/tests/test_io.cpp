#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dipolestack/io.hpp"
#include "fixtures.hpp"

using namespace dipolestack;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dipolestack_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Io, StackRoundTrip) {
  const Stack s = fixtures::fabricated();
  const Stack r = io::stack_from_json(io::stack_to_json(s));
  EXPECT_EQ(io::stack_to_json(r), io::stack_to_json(s));
  EXPECT_DOUBLE_EQ(r.host.thickness_nm, 608.6);
  EXPECT_EQ(r.layers_above.back().material.name(), "silver-thin-measured");
  EXPECT_EQ(r.layers_above.back().material.index_at(620.0), (ComplexIndex{0.15, 3.95}));
}

TEST(Io, SchemaFieldNames) {
  const auto j = io::stack_to_json(fixtures::case_one());
  EXPECT_DOUBLE_EQ(j["host"]["t_nm"].get<double>(), 86.5);
  EXPECT_DOUBLE_EQ(j["dipole"]["lambda_nm"].get<double>(), 620.0);
  EXPECT_DOUBLE_EQ(j["dipole"]["d_nm"].get<double>(), 42.9);
  EXPECT_DOUBLE_EQ(j["dipole"]["theta_deg"].get<double>(), 90.0);
  EXPECT_DOUBLE_EQ(j["layers_above"][0]["t_nm"].get<double>(), 107.6);
}

TEST(Io, MaterialForms) {
  const io::MaterialResolver r;
  EXPECT_EQ(r.resolve(io::json("silica")).index_at(500.0), (ComplexIndex{1.464, 0.0}));
  const auto c = r.resolve(io::json::parse(R"({"name": "glass", "constant": [1.5, 0.01]})"));
  EXPECT_EQ(c.name(), "glass");
  EXPECT_EQ(c.index_at(700.0), (ComplexIndex{1.5, 0.01}));
  const auto t = r.resolve(io::json::parse(R"({"name": "t", "table": [[600, 2.0, 0], [640, 2.2, 0]]})"));
  EXPECT_NEAR(t.index_at(620.0).n, 2.1, 1e-15);
  const auto a = r.resolve(io::json::parse(R"({"name": "d", "constant": [2.414, 0], "absorption": 5e-4})"));
  const auto named = r.resolve(io::json::parse(R"({"name": "diamond", "absorption": 5e-4})"));
  EXPECT_EQ(named.name(), "diamond");
  EXPECT_DOUBLE_EQ(named.index_at(620.0).k, 5e-4);
  EXPECT_DOUBLE_EQ(a.index_at(620.0).k, 5e-4);
  EXPECT_THROW(r.resolve(io::json("no-such-material")), ValidationError);
  EXPECT_THROW(r.resolve(io::json::parse(R"({"name": "bad", "constant": [1.5]})")), ValidationError);
  EXPECT_THROW(r.resolve(io::json(3.0)), ValidationError);
}

TEST(Io, MaterialDirectoryLookup) {
  const auto dir = scratch_dir("materials");
  std::ofstream(dir / "gold.csv") << "# wavelength_nm,n,k\nlambda,n,k\n600,0.25,3.0\n650,0.20,3.4\n";
  std::ofstream(dir / "cap.json") << R"({"name": "cap", "constant": [1.7, 0]})";
  io::MaterialResolver r;
  r.add_directory(dir);
  const auto gold = r.resolve(io::json("gold"));
  EXPECT_NEAR(gold.index_at(625.0).n, 0.225, 1e-12);
  EXPECT_NEAR(gold.index_at(625.0).k, 3.2, 1e-12);
  EXPECT_EQ(r.resolve(io::json::parse(R"({"file": "cap.json"})")).index_at(620.0), (ComplexIndex{1.7, 0.0}));
}

TEST(Io, ReadStackFileAndValidate) {
  const auto dir = scratch_dir("stack");
  std::ofstream(dir / "s.json") << R"({
    "upper": "vacuum",
    "layers_above": [{"material": "silver-literature", "t_nm": 50}],
    "host": {"material": "diamond", "t_nm": 350},
    "layers_below": [{"material": "silver-literature", "t_nm": 300}],
    "lower": "vacuum",
    "dipole": {"lambda_nm": 620, "theta_deg": 90, "d_nm": 175}
  })";
  const Stack s = io::read_stack(dir / "s.json");
  EXPECT_EQ(s.layers_above.size(), 1u);
  EXPECT_DOUBLE_EQ(s.dipole.depth_nm, 175.0);

  std::ofstream(dir / "bad.json") << R"({"host": {"material": "diamond", "t_nm": 100}, "dipole": {"d_nm": 100}})";
  EXPECT_THROW(io::read_stack(dir / "bad.json"), ValidationError);
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(io::read_stack(dir / "broken.json"), ValidationError);
  std::ofstream(dir / "nohost.json") << R"({"dipole": {"d_nm": 10}})";
  EXPECT_THROW(io::read_stack(dir / "nohost.json"), ValidationError);
  EXPECT_THROW(io::read_stack(dir / "missing.json"), ValidationError);
}

TEST(Io, CsvWriterFormat) {
  const auto dir = scratch_dir("csv");
  {
    io::CsvWriter w(dir / "out.csv");
    w.meta("note", "hello").meta("value", 1.0 / 3.0);
    w.header({"a", "b"});
    w.row({1.0 / 3.0, 2.0e-12});
    w.row({620.0, std::numeric_limits<double>::quiet_NaN()});
  }
  EXPECT_EQ(slurp(dir / "out.csv"), "# note: hello\n# value: 0.333333333\na,b\n0.333333333,2e-12\n620,nan\n");
  const auto rows = io::read_csv_columns(dir / "out.csv", 2);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0][1], 2e-12);
  EXPECT_THROW(io::read_csv_columns(dir / "out.csv", 3), ValidationError);
}

TEST(Io, MaterialsUsedListsEveryMedium) {
  const auto j = io::materials_used(fixtures::case_one(), 620.0);
  EXPECT_TRUE(j.contains("diamond"));
  EXPECT_TRUE(j.contains("silica"));
  EXPECT_TRUE(j.contains("silver-literature"));
  EXPECT_TRUE(j.contains("vacuum"));
  EXPECT_DOUBLE_EQ(j["silver-literature"]["k"].get<double>(), 4.21);
}
