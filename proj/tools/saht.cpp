// Command-line driver: collect datasets, compute the Monte Carlo oracle, run
// the Seldonian sweep, and aggregate the results into summary CSVs.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "saht/saht.hpp"

namespace fs = std::filesystem;
using namespace saht;
using namespace saht::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> jobs;
  std::string sizes;
  std::string estimator;
  std::string bound;
  std::string input;
  std::optional<std::size_t> episodes;
};

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& f : split_fields(text, ',')) {
    if (f.empty()) continue;
    out.push_back(parse_number<std::size_t>(f, "--sizes"));
  }
  if (out.empty()) throw ConfigError("--sizes: empty list");
  return out;
}

ExperimentConfig load_with_overrides(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.out.empty()) cfg.output = o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (!o.sizes.empty()) cfg.sizes = parse_sizes(o.sizes);
  cfg.validate();
  return cfg;
}

int cmd_collect(const Options& o) {
  const auto cfg = load_with_overrides(o);
  const auto r = resolve(cfg);
  const std::size_t n = run_collect(cfg, r);
  std::printf("wrote %zu dataset(s) to %s\n", n, cfg.data_dir().string().c_str());
  return 0;
}

int cmd_oracle(const Options& o) {
  const auto cfg = load_with_overrides(o);
  const auto r = resolve(cfg);
  const auto v = run_oracle(cfg, r, o.episodes.value_or(cfg.oracle_episodes));
  write_oracle(cfg, v);
  for (const auto& e : v.entries) {
    std::printf("%-16s", e.policy.c_str());
    for (std::size_t j = 0; j < e.g.size(); ++j)
      std::printf(" %s=%.4f (se %.4f)", v.constraint_names[j].c_str(), e.g[j].mean, e.g[j].std_error);
    std::printf(" return=%.4f (se %.4f) %s\n", e.ret.mean, e.ret.std_error, to_string(e.verdict).c_str());
  }
  std::printf("wrote %s\n", cfg.oracle_path().string().c_str());
  return 0;
}

int cmd_run(const Options& o) {
  const auto cfg = load_with_overrides(o);
  const auto r = resolve(cfg);
  RunFilter filter;
  if (!o.estimator.empty()) filter.estimator = parse_estimator(o.estimator);
  if (!o.bound.empty()) filter.bound = parse_bound(o.bound);
  const auto oracle = read_oracle(cfg);
  const auto outcome = run_experiment(cfg, r, oracle, filter);
  fs::create_directories(cfg.output);
  write_text_file(cfg.results_path().string(), results_to_csv(outcome.rows));
  std::printf("wrote %zu row(s) to %s\n", outcome.rows.size(), cfg.results_path().string().c_str());
  if (outcome.errors > 0) {
    std::fprintf(stderr, "%zu run(s) failed; see messages above\n", outcome.errors);
    return kExitRuntime;
  }
  return 0;
}

/// Results path and output directory for aggregate/ablate.
std::pair<fs::path, fs::path> results_location(const Options& o, const ExperimentConfig* cfg) {
  fs::path input = !o.input.empty() ? fs::path(o.input) : cfg ? cfg->results_path() : fs::path();
  if (input.empty()) throw ConfigError("need --input or --config");
  if (!fs::exists(input)) throw ConfigError("results file '" + input.string() + "' does not exist");
  fs::path out = !o.out.empty() ? fs::path(o.out) : cfg ? cfg->output : input.parent_path();
  return {input, out};
}

int cmd_aggregate(const Options& o) {
  std::optional<ExperimentConfig> cfg;
  if (!o.config.empty()) cfg = load_with_overrides(o);
  const auto [input, out] = results_location(o, cfg ? &*cfg : nullptr);
  const auto rows = parse_results(read_text_file(input.string()), input.string());
  fs::create_directories(out);
  const auto path = out / "summary.csv";
  write_text_file(path.string(), summary_to_csv(summarize(rows)));
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_ablate(const Options& o) {
  const auto cfg = load_with_overrides(o);
  const auto [input, out] = results_location(o, &cfg);
  const auto rows = parse_results(read_text_file(input.string()), input.string());
  fs::create_directories(out);
  const auto path = out / "ablation.csv";
  write_text_file(path.string(), ablation_to_csv(summarize_by_epsilon(rows, cfg)));
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

int cmd_make_policies(const Options& o) {
  const auto cfg = load_with_overrides(o);
  const auto r = resolve(cfg);
  const fs::path dir = o.out.empty() ? cfg.output / "policies" : fs::path(o.out);
  fs::create_directories(dir);
  for (const auto& [id, pol] : r.policies) write_policy((dir / (id + ".txt")).string(), *pol);
  std::printf("wrote %zu policy file(s) to %s\n", r.policies.size(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seldonian policy selection for ad hoc teamwork"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--seed", o.seed, "master seed override");
    sub->add_option("--out", o.out, "output directory override");
    sub->add_option("--jobs", o.jobs, "worker threads");
  };

  auto* collect = app.add_subcommand("collect", "generate one dataset per (behavior, size, trial)");
  common(collect);
  collect->add_option("--sizes", o.sizes, "comma-separated dataset sizes");

  auto* oracle = app.add_subcommand("oracle", "Monte Carlo ground truth for every candidate");
  common(oracle);
  oracle->add_option("--episodes", o.episodes, "episodes per candidate");

  auto* run = app.add_subcommand("run", "Seldonian selection and baseline on every dataset");
  common(run);
  run->add_option("--sizes", o.sizes, "comma-separated dataset sizes");
  run->add_option("--estimator", o.estimator, "restrict to one estimator")->check(CLI::IsMember({"dr", "pdis", "is"}));
  run->add_option("--bound", o.bound, "restrict to one bound")->check(CLI::IsMember({"bernstein", "tstudent"}));

  auto* aggregate = app.add_subcommand("aggregate", "per (env, size, estimator, bound) probabilities");
  common(aggregate);
  aggregate->add_option("--input", o.input, "results CSV (default: <output>/results.csv)");

  auto* ablate = app.add_subcommand("ablate", "probabilities keyed by behavior epsilon");
  common(ablate);
  ablate->add_option("--input", o.input, "results CSV (default: <output>/results.csv)");

  auto* make = app.add_subcommand("make-policies", "write every configured policy, epsilon variants included");
  common(make);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*collect) return cmd_collect(o);
    if (*oracle) return cmd_oracle(o);
    if (*run) return cmd_run(o);
    if (*aggregate) return cmd_aggregate(o);
    if (*ablate) return cmd_ablate(o);
    if (*make) return cmd_make_policies(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
