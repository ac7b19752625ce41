#include <cstdio>
#include <cstring>
#include <filesystem>
#include <string>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "umarkov/model_io.hpp"
#include "test_util.hpp"

using namespace umarkov;
using namespace testutil;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_path(const std::string& stem) {
  static int counter = 0;
  return (std::filesystem::temp_directory_path() /
          (stem + "." + std::to_string(++counter) + ".tmp"))
      .string();
}

}  // namespace

TEST_CASE("format_double round trips the exact bits", "[io]") {
  for (double v : {0.0, 1.0, -1.0, 1.0 / 3.0, 2.5e17, -7.25e-9, 1e-300, 3.141592653589793,
                   0.1 + 0.2, 123456789.123456789}) {
    std::string s = format_double(v);
    double back = std::strtod(s.c_str(), nullptr);
    REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
  }
  REQUIRE(format_double(1.0) == "1");
  REQUIRE(format_double(0.5) == "0.5");
}

TEST_CASE("run csv layout", "[io]") {
  UncertainGenerator gen(contact2());
  StateFunction f = sum_function(2);
  SemigroupRun run = evolve(gen, f, 0.01, 5e-3);
  std::string csv = run_csv(run);

  REQUIRE(csv.rfind("t,state_index,value,argmax_control\n", 0) == 0);
  std::size_t rows = 0;
  for (char ch : csv)
    if (ch == '\n') ++rows;
  REQUIRE(rows == 1 + run.time_grid.size() * 4);
  // First data row is the t=0 value of state 0.
  REQUIRE(csv.find("\n0,0," + format_double(f[0]) + ",") != std::string::npos);
}

TEST_CASE("policy csv round trip", "[io]") {
  UncertainGenerator gen(contact2());
  SemigroupRun run = evolve(gen, upset_indicator(2, 3), 0.02, 5e-3);
  MarkovPolicy policy = extract_policy(run);

  std::string csv = policy_csv(policy, gen.speed().grid());
  REQUIRE(csv.rfind("cell_start,cell_end,state_index,control_label\n", 0) == 0);
  MarkovPolicy back = read_policy_csv(csv, gen);
  REQUIRE(back.cell_boundaries == policy.cell_boundaries);
  REQUIRE(back.choice == policy.choice);
}

TEST_CASE("policy csv reader accepts shuffled rows", "[io]") {
  UncertainGenerator gen(contact2());
  // Two cells listed interleaved and out of order.
  std::string csv =
      "cell_start,cell_end,state_index,control_label\n"
      "0.5,1,3,lam1\n"
      "0,0.5,0,lam0\n"
      "0.5,1,0,lam0\n"
      "0,0.5,3,lam0\n"
      "0.5,1,1,lam1\n"
      "0,0.5,1,lam1\n"
      "0.5,1,2,lam1\n"
      "0,0.5,2,lam0\n";
  MarkovPolicy policy = read_policy_csv(csv, gen);
  REQUIRE(policy.cell_boundaries == std::vector<double>{0.0, 0.5, 1.0});
  REQUIRE(policy.choice[0] == std::vector<int>{0, 1, 0, 0});
  REQUIRE(policy.choice[1] == std::vector<int>{0, 1, 1, 1});
}

TEST_CASE("policy csv reader rejects malformed input", "[io]") {
  UncertainGenerator gen(contact2());
  const std::string header = "cell_start,cell_end,state_index,control_label\n";

  try {
    read_policy_csv(header + "0,1,0,lam0\n0,1,huh,lam0\n", gen);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 3);
    REQUIRE_THAT(e.what(), ContainsSubstring("huh"));
  }

  REQUIRE_THROWS_AS(read_policy_csv(header, gen), ParseError);
  REQUIRE_THROWS_AS(read_policy_csv(header + "0,1,0,lam0\n", gen), ParseError);  // misses 1..3
  REQUIRE_THROWS_AS(
      read_policy_csv(header + "0,1,0,lam0\n0,1,1,lam0\n0,1,2,lam0\n0,1,2,lam0\n", gen),
      ParseError);  // state 2 twice
  REQUIRE_THROWS_AS(read_policy_csv(header + "0,1,0,lam0\n0,1,1\n", gen), ParseError);
  REQUIRE_THROWS_AS(read_policy_csv(header + "0,1,9,lam0\n", gen), ParseError);
  REQUIRE_THROWS_AS(read_policy_csv(header + "0,1,0,nope\n", gen), ParameterError);

  // Cells (0,0.4) and (0.6,1) leave a hole.
  std::string gap = header;
  for (int k = 0; k < 4; ++k) gap += "0,0.4," + std::to_string(k) + ",lam0\n";
  for (int k = 0; k < 4; ++k) gap += "0.6,1," + std::to_string(k) + ",lam0\n";
  REQUIRE_THROWS_AS(read_policy_csv(gap, gen), ParseError);
}

TEST_CASE("trajectory csv starts at the initial state", "[io]") {
  UncertainGenerator gen(contact2());
  MarkovPolicy policy;
  policy.cell_boundaries = {0.0, 4.0};
  policy.choice = {std::vector<int>(4, 1)};
  Trajectory traj = simulate(gen, policy, 3, 11);
  std::string csv = trajectory_csv(traj);
  REQUIRE(csv.rfind("jump_time,state_index\n0,3\n", 0) == 0);
  std::size_t rows = 0;
  for (char ch : csv)
    if (ch == '\n') ++rows;
  REQUIRE(rows == 2 + traj.jump_times.size());
}

TEST_CASE("small table formats", "[io]") {
  EstimateRow row{3, {1.25, 0.5, 100}};
  REQUIRE(estimate_csv({row}) == "state,mean,stderr,n\n3,1.25,0.5,100\n");

  REQUIRE(probe_csv({{1.0, 0.125}, {5.0, 0.0625}}) == "t,sup_gap\n1,0.125\n5,0.0625\n");

  REQUIRE(value_csv({0.5, -2.0}) == "state_index,value\n0,0.5\n1,-2\n");

  std::vector<Distribution> dists{{std::vector<double>{1.0, 0.0}},
                                  {std::vector<double>{0.0, 1.0}}};
  REQUIRE(stationary_csv(dists) ==
          "distribution_index,state_index,weight\n0,0,1\n0,1,0\n1,0,0\n1,1,1\n");
}

TEST_CASE("function csv round trip and validation", "[io]") {
  StateFunction f{0.25, -1.0 / 3.0, 7e-12, 4.0};
  StateFunction back = read_function_csv(value_csv(f), 4);
  REQUIRE(back == f);  // bitwise through the 17-digit format

  REQUIRE_THROWS_AS(read_function_csv("state_index,value\n0,1\n", 2), ParseError);
  REQUIRE_THROWS_AS(read_function_csv("state_index,value\n0,1\n0,2\n1,0\n", 2), ParseError);
  REQUIRE_THROWS_AS(read_function_csv("state_index,value\n0,1\n5,2\n", 2), ParseError);
  REQUIRE_THROWS_AS(read_function_csv("state_index,value\n0\n1,0\n", 2), ParseError);
  try {
    read_function_csv("state_index,value\n0,1\n1,zebra\n", 2);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 3);
  }
}

TEST_CASE("model json: contact and ising match the builders", "[io]") {
  std::string contact_text = R"({
    "sites": 3,
    "edges": [[0, 1], [1, 2]],
    "model": "contact",
    "controls": [{"label": "lam0", "lambda": 0.1}, {"label": "lam1", "lambda": 0.4}]
  })";
  ModelSpec spec = parse_model_json(contact_text);
  REQUIRE(spec.sites == 3);
  REQUIRE(spec.model == "contact");
  SpeedFunction parsed = speed_from_spec(spec);
  SpeedFunction built = contact3();
  REQUIRE(parsed.grid().size() == 2);
  REQUIRE(parsed.grid().point(1).label == "lam1");
  for (std::size_t g = 0; g < 2; ++g)
    for (int x = 0; x < 3; ++x)
      for (Configuration eta = 0; eta < 8; ++eta)
        REQUIRE(parsed.rate(g, x, eta) == built.rate(g, x, eta));

  std::string ising_text = R"({
    "sites": 2,
    "edges": [[0, 1]],
    "model": "ising",
    "controls": [{"label": "b", "beta": 0.5}]
  })";
  SpeedFunction ising = speed_from_spec(parse_model_json(ising_text));
  REQUIRE(ising.rate(0, 0, 0b11) == Catch::Approx(std::exp(-0.5)).margin(1e-15));
}

TEST_CASE("model json: tabular round trip", "[io]") {
  SpeedFunction c = contact2();
  nlohmann::json doc;
  doc["sites"] = 2;
  doc["model"] = "tabular";
  doc["controls"] = nlohmann::json::array({{{"label", "a"}}, {{"label", "b"}}});
  auto rates = nlohmann::json::array();
  for (std::size_t g = 0; g < 2; ++g) {
    auto per_g = nlohmann::json::array();
    for (int x = 0; x < 2; ++x) {
      auto per_x = nlohmann::json::array();
      for (Configuration eta = 0; eta < 4; ++eta) per_x.push_back(c.rate(g, x, eta));
      per_g.push_back(per_x);
    }
    rates.push_back(per_g);
  }
  doc["rates"] = rates;

  SpeedFunction back = speed_from_spec(parse_model_json(doc.dump()));
  for (std::size_t g = 0; g < 2; ++g)
    for (int x = 0; x < 2; ++x)
      for (Configuration eta = 0; eta < 4; ++eta)
        REQUIRE(back.rate(g, x, eta) == c.rate(g, x, eta));
}

TEST_CASE("model json: malformed text reports the line", "[io]") {
  try {
    parse_model_json("{\n  \"sites\": }\n}");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    REQUIRE(e.line == 2);
    REQUIRE(e.column >= 1);
    REQUIRE_THAT(e.what(), ContainsSubstring("malformed JSON at line 2"));
  }
  REQUIRE_THROWS_AS(parse_model_json(""), ParseError);
  REQUIRE_THROWS_AS(parse_model_json("[1, 2]"), ParseError);
}

TEST_CASE("model json: schema violations", "[io]") {
  auto expect_schema = [](const std::string& text) {
    REQUIRE_THROWS_WITH(parse_model_json(text), ContainsSubstring("model spec"));
  };
  expect_schema(R"({"model": "contact", "controls": [{"label": "a", "lambda": 1}]})");
  expect_schema(R"({"sites": 2, "controls": [{"label": "a", "lambda": 1}]})");
  expect_schema(R"({"sites": 2, "model": "contact", "controls": []})");
  expect_schema(R"({"sites": 2, "model": "heat", "controls": [{"label": "a"}]})");
  expect_schema(R"({"sites": 2, "model": "contact", "controls": [{"label": "a"}]})");
  expect_schema(R"({"sites": 2, "model": "contact", "controls": [{"label": "a", "lambda": 1}],
                    "rates": []})");
  expect_schema(R"({"sites": 2, "model": "tabular", "controls": [{"label": "a"}]})");
  expect_schema(R"({"sites": 2, "edges": [[0]], "model": "contact",
                    "controls": [{"label": "a", "lambda": 1}]})");
}

TEST_CASE("verdict json parses back", "[io]") {
  ErgodicityVerdict verdict = certify_nonlinear_ergodicity(contact3());
  nlohmann::json doc = nlohmann::json::parse(verdict_json(verdict));
  REQUIRE(doc["status"] == "certified_ergodic");
  REQUIRE(doc["mu"].is_array());
  REQUIRE(doc["mu"].size() == 8);
  REQUIRE(doc["mu"][0].get<double>() == Catch::Approx(1.0).margin(1e-8));
  REQUIRE(doc["diagnostics"].size() == 5);
  REQUIRE(doc["diagnostics"]["same_invariant"] == true);

  ErgodicityVerdict bad =
      certify_nonlinear_ergodicity(ising_speed(complete_graph(2), beta_grid({0.2, 0.5})));
  nlohmann::json bdoc = nlohmann::json::parse(verdict_json(bad));
  REQUIRE(bdoc["status"] == "not_certified");
  REQUIRE(bdoc["mu"].is_null());
  REQUIRE(bdoc["diagnostics"]["same_invariant"] == false);
  REQUIRE(bdoc["diagnostics"]["upper_attractive"] == true);
}

TEST_CASE("text file round trip", "[io]") {
  std::string path = temp_path("umarkov_io");
  std::string body = "alpha,beta\n1,2\n";
  write_text_file(path, body);
  REQUIRE(read_text_file(path) == body);
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(read_text_file(path), Error);
}
