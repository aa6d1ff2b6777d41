#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "saht/saht.hpp"

using namespace saht;
using namespace saht::harness;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = SAHT_SOURCE_DIR;

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("saht_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ExperimentConfig mini_config(const fs::path& out) {
  auto cfg = load_config(kSource / "configs" / "mini.json");
  cfg.output = out;
  return cfg;
}

nlohmann::json mini_json() { return nlohmann::json::parse(read_text_file((kSource / "configs/mini.json").string())); }

struct PipelineFiles {
  std::string oracle, results, summary, ablation;
};

PipelineFiles run_pipeline(const ExperimentConfig& cfg) {
  const auto r = resolve(cfg);
  run_collect(cfg, r);
  write_oracle(cfg, run_oracle(cfg, r, cfg.oracle_episodes));
  const auto rows = run_experiment(cfg, r, read_oracle(cfg)).rows;
  write_text_file(cfg.results_path().string(), results_to_csv(rows));
  const auto parsed = parse_results(read_text_file(cfg.results_path().string()));
  return {read_text_file(cfg.oracle_path().string()), read_text_file(cfg.results_path().string()),
          summary_to_csv(summarize(parsed)), ablation_to_csv(summarize_by_epsilon(parsed, cfg))};
}

ResultRow row(std::string decision, std::string chosen = "", std::string reliable = "NA") {
  ResultRow r;
  r.env = "e";
  r.size = 10;
  r.estimator = "dr";
  r.bound = "tstudent";
  r.behavior = "b";
  r.decision = std::move(decision);
  r.chosen = std::move(chosen);
  r.oracle_reliable = std::move(reliable);
  return r;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SAHT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"mini.json", "chain_world.json", "blackjack.json", "lbf.json"}) {
    SCOPED_TRACE(name);
    const auto cfg = load_config(kSource / "configs" / name);
    EXPECT_NO_THROW(resolve(cfg));
  }
}

TEST(Config, ChainWorldProtocolCellCount) {
  const auto cfg = load_config(kSource / "configs" / "chain_world.json");
  EXPECT_EQ(cfg.sizes, (std::vector<std::size_t>{20, 200, 500, 1000, 2000}));
  EXPECT_EQ(cfg.trials, 20u);
  EXPECT_EQ(enumerate_cells(cfg).size(), 300u);
  EXPECT_DOUBLE_EQ(cfg.split_ratio, 0.15);
  EXPECT_DOUBLE_EQ(cfg.constraints[0].delta, 0.15);
}

TEST(Config, Defaults) {
  auto j = mini_json();
  j.erase("algorithm");
  j.erase("runtime");
  const auto cfg = parse_config(j, kSource / "configs");
  EXPECT_DOUBLE_EQ(cfg.split_ratio, 0.15);
  EXPECT_EQ(cfg.estimators.size(), 2u);
  EXPECT_EQ(cfg.bounds.size(), 2u);
  EXPECT_TRUE(cfg.baseline);
  EXPECT_TRUE(std::isinf(cfg.clip_lo));
  EXPECT_EQ(cfg.jobs, 1u);
  EXPECT_TRUE(cfg.record_runtime);
}

TEST(Config, ValidationErrors) {
  auto expect_invalid = [](nlohmann::json j) {
    auto cfg = parse_config(j, kSource / "configs");
    EXPECT_THROW(cfg.validate(), ConfigError) << j.dump();
  };
  auto j = mini_json();
  j["sweep"]["sizes"] = {40, 10};
  expect_invalid(j);
  j = mini_json();
  j["sweep"]["sizes"] = {0, 10};
  expect_invalid(j);
  j = mini_json();
  j["policies"]["forward"] = {{"file", "policies/missing.txt"}};
  expect_invalid(j);
  j = mini_json();
  j["behaviors"] = {"nobody"};
  expect_invalid(j);
  j = mini_json();
  j["teammates"]["actual"] = {"forward", "eager"};
  expect_invalid(j);
  j = mini_json();
  j["constraints"][0]["delta"] = 1.5;
  expect_invalid(j);
  j = mini_json();
  j["runtime"]["jobs"] = 0;
  expect_invalid(j);
  j = mini_json();
  j["policies"]["forward"] = {{"rule", "forward"}, {"file", "x.txt"}};
  expect_invalid(j);
}

TEST(Config, MalformedJsonNamesItself) {
  const auto dir = temp_dir("badjson");
  write_text_file((dir / "c.json").string(), "{\"env\": ");
  try {
    load_config(dir / "c.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("c.json"), std::string::npos);
  }
  write_text_file((dir / "d.json").string(), "{}");
  EXPECT_THROW(load_config(dir / "d.json"), ConfigError);
}

TEST(Config, TeammateCountMustMatchEnvironment) {
  auto j = mini_json();
  j["teammates"]["actual"] = {"steady"};
  const auto cfg = parse_config(j, kSource / "configs");
  EXPECT_THROW(resolve(cfg), ConfigError);
}

TEST(Oracle, ClassifyAmbiguityBand) {
  EXPECT_EQ(classify(5.0, 0.01, 4.9), Verdict::reliable);
  EXPECT_EQ(classify(4.8, 0.01, 4.9), Verdict::unreliable);
  EXPECT_EQ(classify(4.92, 0.01, 4.9), Verdict::ambiguous);
  EXPECT_EQ(classify(4.875, 0.01, 4.9), Verdict::ambiguous);
  EXPECT_EQ(classify(4.865, 0.01, 4.9), Verdict::unreliable);
  EXPECT_EQ(classify(4.9, 0.0, 4.9), Verdict::ambiguous);
  EXPECT_EQ(combine({Verdict::reliable, Verdict::ambiguous}), Verdict::ambiguous);
  EXPECT_EQ(combine({Verdict::ambiguous, Verdict::unreliable}), Verdict::unreliable);
  EXPECT_EQ(combine({}), Verdict::reliable);
}

TEST(Oracle, DuplicateOfReliablePolicyIsReliable) {
  auto j = mini_json();
  j["policies"]["indifferent_copy"] = {{"rule", "indifferent"}};
  j["candidates"] = {"indifferent", "indifferent_copy"};
  auto cfg = parse_config(j, kSource / "configs");
  cfg.validate();
  const auto v = run_oracle(cfg, resolve(cfg), 2000);
  EXPECT_EQ(v.at("indifferent").verdict, Verdict::reliable);
  EXPECT_EQ(v.at("indifferent_copy").verdict, Verdict::reliable);
}

TEST(Oracle, RewardConstraintEqualsReturn) {
  auto cfg = load_config(kSource / "configs" / "lbf.json");
  cfg.candidates = {cfg.candidates.front()};
  const auto v = run_oracle(cfg, resolve(cfg), 300);
  const auto& e = v.entries.at(0);
  EXPECT_EQ(e.g.at(0).mean, e.ret.mean);
  EXPECT_EQ(e.g.at(0).std_error, e.ret.std_error);
}

TEST(Oracle, StandardErrorScalesWithEpisodes) {
  const auto cfg = mini_config(temp_dir("se"));
  const auto r = resolve(cfg);
  const auto a = run_oracle(cfg, r, 4000);
  const auto b = run_oracle(cfg, r, 8000);
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const double ratio = b.entries[i].g[0].std_error / a.entries[i].g[0].std_error;
    EXPECT_NEAR(ratio, 1.0 / std::sqrt(2.0), 0.07) << a.entries[i].policy;
  }
}

TEST(Oracle, CsvRoundTrip) {
  const auto cfg = mini_config(temp_dir("oracle_csv"));
  const auto v = run_oracle(cfg, resolve(cfg), 500);
  const auto back = oracle_from_csv(v.to_csv(), "o.csv");
  EXPECT_EQ(back.to_csv(), v.to_csv());
  EXPECT_THROW(oracle_from_csv("bad\n", "o.csv"), ConfigError);
}

TEST(Collect, CountsAndDeterminism) {
  const auto dir = temp_dir("collect");
  auto cfg = mini_config(dir / "a");
  const auto r = resolve(cfg);
  EXPECT_EQ(run_collect(cfg, r), 12u);
  cfg.output = dir / "b";
  cfg.jobs = 1;
  run_collect(cfg, r);
  for (const auto& c : enumerate_cells(cfg)) {
    const auto name = cfg.dataset_path(c.behavior, c.size, c.trial).filename();
    EXPECT_EQ(read_text_file((dir / "a" / "data" / name).string()), read_text_file((dir / "b" / "data" / name).string()));
  }
}

TEST(Collect, ZeroTrialsWritesNothing) {
  const auto dir = temp_dir("zero");
  auto cfg = mini_config(dir);
  cfg.trials = 0;
  EXPECT_EQ(run_collect(cfg, resolve(cfg)), 0u);
  EXPECT_FALSE(fs::exists(cfg.data_dir()));
}

TEST(Collect, CellsDifferBySeed) {
  const auto cfg = mini_config(temp_dir("cells"));
  const auto cells = enumerate_cells(cfg);
  std::set<std::uint64_t> seeds;
  for (const auto& c : cells) seeds.insert(cell_seed(cfg, "collect", c));
  EXPECT_EQ(seeds.size(), cells.size());
}

TEST(Run, MissingDatasetsAreListed) {
  const auto cfg = mini_config(temp_dir("missing"));
  const auto r = resolve(cfg);
  const auto oracle = run_oracle(cfg, r, 200);
  try {
    run_experiment(cfg, r, oracle);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("12 dataset(s) missing"), std::string::npos) << msg;
    EXPECT_NE(msg.find("resetter_e20/10/0"), std::string::npos) << msg;
  }
}

TEST(Run, RowSchemaContract) {
  const auto cfg = mini_config(temp_dir("schema"));
  const auto files = run_pipeline(cfg);
  const auto rows = parse_results(files.results);
  const std::size_t per_cell = cfg.estimators.size() * cfg.bounds.size() + 1;
  EXPECT_EQ(rows.size(), enumerate_cells(cfg).size() * per_cell);
  for (const auto& r : rows) {
    if (r.decision == "no_solution") {
      EXPECT_TRUE(r.chosen.empty());
      EXPECT_EQ(r.oracle_reliable, "NA");
    }
    if (r.estimator == "baseline") {
      EXPECT_EQ(r.bound, "none");
      EXPECT_EQ(r.decision, "solution");
      EXPECT_FALSE(r.chosen.empty());
      EXPECT_TRUE(r.alpha_values.empty());
    } else {
      EXPECT_EQ(std::count(r.alpha_values.begin(), r.alpha_values.end(), ';'), 2);
    }
    EXPECT_EQ(r.runtime_ms, 0);
  }
}

TEST(Run, WorkerCountDoesNotChangeOutput) {
  const auto dir = temp_dir("jobs");
  auto cfg = mini_config(dir / "a");
  cfg.jobs = 1;
  const auto one = run_pipeline(cfg);
  cfg.output = dir / "b";
  cfg.jobs = 4;
  const auto four = run_pipeline(cfg);
  EXPECT_EQ(one.results, four.results);
  EXPECT_EQ(one.oracle, four.oracle);
}

TEST(Run, FilterRestrictsMatrix) {
  const auto cfg = mini_config(temp_dir("filter"));
  const auto r = resolve(cfg);
  run_collect(cfg, r);
  const auto oracle = run_oracle(cfg, r, 200);
  const auto rows = run_experiment(cfg, r, oracle, {EstimatorKind::pdis, BoundKind::bernstein}).rows;
  EXPECT_EQ(rows.size(), 2 * enumerate_cells(cfg).size());
  for (const auto& row : rows) EXPECT_TRUE(row.estimator == "baseline" || row.estimator == "pdis");
  EXPECT_THROW(run_experiment(cfg, r, oracle, {EstimatorKind::is, std::nullopt}), ConfigError);
}

TEST(Run, TimeoutIsRecorded) {
  auto cfg = mini_config(temp_dir("timeout"));
  cfg.timeout_s = 1e-9;
  const auto r = resolve(cfg);
  run_collect(cfg, r);
  const auto rows = run_experiment(cfg, r, run_oracle(cfg, r, 200)).rows;
  for (const auto& row : rows) EXPECT_EQ(row.decision, "timeout");
  const auto s = summarize(rows);
  for (const auto& [k, v] : s) EXPECT_EQ(v.timeouts, v.solution.n);
}

TEST(Run, SupportStarvationGivesNoSolution) {
  // Deterministic behavior always plays action 0; the candidate never does, so every weight is zero.
  const auto dir = temp_dir("starve");
  auto j = mini_json();
  const auto env = make_environment(j["env"]);
  const auto& sig = env->signature();
  std::vector<double> zero(sig.num_states * sig.num_actions, 0.0), one = zero;
  for (StateId s = 0; s < sig.num_states; ++s) {
    zero[s * sig.num_actions] = 1.0;
    one[s * sig.num_actions + 1] = 1.0;
  }
  write_policy((dir / "always0.txt").string(), TabularPolicy("always0", sig.num_states, sig.num_actions, zero));
  write_policy((dir / "always1.txt").string(), TabularPolicy("always1", sig.num_states, sig.num_actions, one));
  for (const auto& id : {"steady", "eager", "wary"})
    write_policy((dir / (std::string(id) + ".txt")).string(), builtin_policy(*env, id, true, id));
  j["policies"] = {{"always0", {{"file", "always0.txt"}, {"epsilon", 0.0}}},
                   {"always1", {{"file", "always1.txt"}}},
                   {"steady", {{"file", "steady.txt"}}},
                   {"eager", {{"file", "eager.txt"}}},
                   {"wary", {{"file", "wary.txt"}}}};
  j["behaviors"] = {"always0"};
  j["candidates"] = {"always1"};
  j["constraints"][0]["threshold"] = 0.5;
  j["sweep"]["sizes"] = {10, 40, 160};
  j["algorithm"]["estimators"] = {"is", "pdis", "dr"};
  auto cfg = parse_config(j, dir);
  cfg.output = dir / "out";
  cfg.validate();
  const auto r = resolve(cfg);
  run_collect(cfg, r);
  const auto oracle = run_oracle(cfg, r, 500);
  const auto rows = run_experiment(cfg, r, oracle).rows;
  const auto ablation = summarize_by_epsilon(rows, cfg);
  for (const auto& [k, s] : ablation) {
    const auto& est = std::get<2>(k);
    EXPECT_EQ(s.errors, 0u);
    if (est == "is" || est == "pdis") {
      EXPECT_EQ(s.solution.p(), 0.0) << est << "/" << std::get<3>(k);
    }
  }
  // DR keeps the model term V(s_0) when all weights vanish, so it can still certify.
  // Agreement depends on actions only, and the fitted teammate model gets it right here.
  EXPECT_EQ(oracle.at("always1").verdict, Verdict::reliable);
  for (const auto& row : rows)
    if (row.estimator == "dr" && row.decision == "solution") {
      EXPECT_EQ(row.oracle_reliable, "1");
    }
}

TEST(Aggregate, AllNoSolution) {
  std::vector<ResultRow> rows(20, row("no_solution"));
  const auto s = summarize(rows).begin()->second;
  EXPECT_EQ(s.solution.p(), 0.0);
  EXPECT_EQ(s.solution.lo(), 0.0);
  EXPECT_EQ(s.solution.hi(), 0.0);
  EXPECT_EQ(s.unreliable.n, 0u);
  EXPECT_EQ(s.unreliable.p(), 0.0);
}

TEST(Aggregate, AllDecidedNoneUnreliable) {
  std::vector<ResultRow> rows(20, row("solution", "a", "1"));
  const auto s = summarize(rows).begin()->second;
  EXPECT_EQ(s.solution.p(), 1.0);
  EXPECT_EQ(s.solution.hi(), 1.0);
  EXPECT_EQ(s.unreliable.p(), 0.0);
}

TEST(Aggregate, AmbiguousPicksExcluded) {
  std::vector<ResultRow> rows = {row("solution", "a", "ambiguous"), row("solution", "a", "0"),
                                 row("solution", "a", "1"), row("no_solution"), row("timeout"), row("error")};
  const auto s = summarize(rows).begin()->second;
  EXPECT_EQ(s.solution.n, 6u);
  EXPECT_EQ(s.solution.hits, 3u);
  EXPECT_EQ(s.unreliable.n, 2u);
  EXPECT_EQ(s.unreliable.hits, 1u);
  EXPECT_EQ(s.timeouts, 1u);
  EXPECT_EQ(s.errors, 1u);
}

TEST(Aggregate, IntervalMatchesNormalApproximation) {
  Proportion p{5, 20};
  const double hw = 1.959963984540054 * std::sqrt(0.25 * 0.75 / 20.0);
  EXPECT_NEAR(p.lo(), 0.25 - hw, 1e-15);
  EXPECT_NEAR(p.hi(), 0.25 + hw, 1e-15);
  Proportion q{1, 20};
  EXPECT_EQ(q.lo(), 0.0);
  Proportion empty{};
  EXPECT_EQ(empty.p(), 0.0);
  EXPECT_EQ(empty.hi(), 0.0);
}

TEST(Aggregate, ProbabilitiesStayInUnitInterval) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(30);
    Proportion p{rng.below(n + 1), n};
    EXPECT_GE(p.lo(), 0.0);
    EXPECT_LE(p.hi(), 1.0);
    EXPECT_LE(p.lo(), p.p());
    EXPECT_GE(p.hi(), p.p());
  }
}

TEST(Aggregate, ParseErrorsCarryLineNumbers) {
  const std::string header(kResultsHeader);
  auto expect_error = [&](const std::string& body, const std::string& fragment) {
    try {
      parse_results(header + "\n" + body, "r.csv");
      FAIL() << body;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  const std::string good = "e,10,0,b,dr,tstudent,no_solution,,NA,a:1,0\n";
  EXPECT_EQ(parse_results(header + "\n" + good).size(), 1u);
  expect_error(good + "e,10,0,b,dr\n", "r.csv:3: expected 11 fields");
  expect_error("e,x,0,b,dr,tstudent,no_solution,,NA,a:1,0\n", "r.csv:2: cannot parse");
  expect_error("e,10,0,b,dr,tstudent,maybe,,NA,a:1,0\n", "r.csv:2: unknown decision");
  expect_error("e,10,0,b,dr,tstudent,solution,,1,a:1,0\n", "r.csv:2: solution row without");
  expect_error("e,10,0,b,dr,tstudent,solution,a,yes,a:1,0\n", "r.csv:2: bad oracle_reliable");
  EXPECT_THROW(parse_results("wrong,header\n"), ConfigError);
}

TEST(Ablate, SingleBehaviorMatchesPooled) {
  auto cfg = mini_config(temp_dir("ablate"));
  cfg.behaviors = {"drifting_e50"};
  const auto files = run_pipeline(cfg);
  const auto rows = parse_results(files.results);
  const auto pooled = summarize(rows);
  const auto by_eps = summarize_by_epsilon(rows, cfg);
  ASSERT_EQ(pooled.size(), by_eps.size());
  for (const auto& [k, s] : by_eps) {
    const auto& [env, eps, est, bound, size] = k;
    EXPECT_EQ(eps, 0.5);
    EXPECT_EQ(summary_fields(s), summary_fields(pooled.at({env, est, bound, size})));
  }
}

TEST(Ablate, BehaviorWithoutEpsilonIsRejected) {
  auto cfg = mini_config(temp_dir("ablate_err"));
  std::vector<ResultRow> rows = {row("no_solution")};
  rows[0].behavior = "forward";
  EXPECT_THROW(summarize_by_epsilon(rows, cfg), ConfigError);
  rows[0].behavior = "nobody";
  EXPECT_THROW(summarize_by_epsilon(rows, cfg), ConfigError);
}

TEST(Golden, MiniPipelineMatchesCheckedInCsv) {
  const auto cfg = mini_config(temp_dir("golden"));
  const auto files = run_pipeline(cfg);
  const auto golden = kSource / "tests" / "golden";
  EXPECT_EQ(files.oracle, read_text_file((golden / "mini_oracle.csv").string()));
  EXPECT_EQ(files.results, read_text_file((golden / "mini_results.csv").string()));
  EXPECT_EQ(files.summary, read_text_file((golden / "mini_summary.csv").string()));
  EXPECT_EQ(files.ablation, read_text_file((golden / "mini_ablation.csv").string()));
}

TEST(Pool, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(Pool, RethrowsFirstError) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw ConfigError("boom");
               }),
               ConfigError);
}

TEST(Cli, ExitCodes) {
  const auto dir = temp_dir("cli");
  const std::string mini = (kSource / "configs" / "mini.json").string();
  const std::string out = " --out " + (dir / "out").string();
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("bogus"), 2);
  EXPECT_EQ(run_cli("collect"), 2);
  EXPECT_EQ(run_cli("collect --config /nonexistent.json"), 2);
  EXPECT_EQ(run_cli("run --config " + mini + out), 2);
  EXPECT_EQ(run_cli("run --config " + mini + out + " --estimator nope"), 2);
  EXPECT_EQ(run_cli("collect --config " + mini + out + " --sizes 40,10"), 2);
  EXPECT_EQ(run_cli("collect --config " + mini + out + " --sizes 10 --seed 3 --jobs 2"), 0);
  EXPECT_EQ(run_cli("oracle --config " + mini + out + " --episodes 200"), 0);
  EXPECT_EQ(run_cli("run --config " + mini + out + " --sizes 10 --estimator dr --bound tstudent"), 0);
  EXPECT_EQ(run_cli("aggregate --config " + mini + out), 0);
  EXPECT_EQ(run_cli("ablate --config " + mini + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "ablation.csv"));
  EXPECT_EQ(run_cli("aggregate --input " + (dir / "nothing.csv").string()), 2);
  write_text_file((dir / "blocker").string(), "");
  EXPECT_EQ(run_cli("collect --config " + mini + " --out " + (dir / "blocker" / "sub").string()), 3);
}

TEST(Cli, MakePoliciesWritesEpsilonVariants) {
  const auto dir = temp_dir("make");
  const std::string mini = (kSource / "configs" / "mini.json").string();
  ASSERT_EQ(run_cli("make-policies --config " + mini + " --out " + dir.string()), 0);
  const auto cfg = mini_config(dir);
  const auto env = make_environment(cfg.env_block);
  const auto pol = read_policy((dir / "resetter_e20.txt").string(), "r", env->signature());
  const auto base = builtin_policy(*env, "resetter", false, "r").mixed_with_uniform(0.2, "r");
  for (StateId s = 0; s < pol.num_states(); ++s)
    for (ActionId a = 0; a < pol.num_actions(); ++a) EXPECT_EQ(pol(s, a), base(s, a));
}
