#include "newsclip/cli.hpp"

#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "newsclip/error.hpp"
#include "newsclip/pipeline.hpp"
#include "newsclip/synthetic.hpp"

namespace newsclip {

namespace {

using json = nlohmann::json;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::string> store;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> chunk_size;
  std::vector<std::string> strategies;
  std::string report;
  std::optional<std::uint32_t> per_strategy;
  std::optional<std::string> partition;
  std::optional<std::uint32_t> n;
  std::optional<std::uint32_t> negatives;
  std::optional<std::uint32_t> trials;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
}

PipelineConfig pipeline_config(const Flags& f) {
  PipelineConfig c;
  if (f.config) c = pipeline_config_from_json(read_json_file(*f.config));
  if (f.store) c.store_path = *f.store;
  if (f.out) c.output_dir = *f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (f.chunk_size) c.chunk_size = *f.chunk_size;
  if (!f.strategies.empty()) {
    c.strategies.clear();
    for (const auto& name : f.strategies) {
      const auto s = parse_strategy(name);
      if (!s) throw Error(ErrorCode::kInvalidConfig, "unknown strategy '" + name + "'");
      c.strategies.push_back(*s);
    }
  }
  return c;
}

int cmd_validate(const Flags& f, std::ostream& out) {
  json report;
  try {
    if (!f.store) throw Error(ErrorCode::kInvalidConfig, "--store is required");
    const auto store = load_store(*f.store);
    const auto result = validate_store(store);
    report = result.to_json();
    out << report.dump(2) << "\n";
    return result.ok() ? kExitOk : kExitFailures;
  } catch (const Error& e) {
    report["ok"] = false;
    report["error"] = error_code_name(e.code());
    report["message"] = e.message();
    out << report.dump(2) << "\n";
    return kExitBadInput;
  }
}

int cmd_generate(const Flags& f, std::ostream& out, std::ostream& err) {
  const auto config = pipeline_config(f);
  const auto outcome = run_generate(config, &err);
  const auto violations = outcome.datasets.audit_violations();
  out << "wrote " << outcome.output_dir.string() << " (" << violations << " audit violations)\n";
  return violations == 0 ? kExitOk : kExitFailures;
}

int cmd_report(const Flags& f, std::ostream& out) {
  std::optional<PipelineConfig> config;
  if (f.config) config = pipeline_config(f);
  ReportOptions options;
  if (f.store) {
    options.store_path = *f.store;
  } else if (config && !config->store_path.empty()) {
    options.store_path = config->store_path;
  }
  std::filesystem::path dataset;
  if (f.dataset) {
    dataset = *f.dataset;
  } else if (f.out) {
    dataset = *f.out;
  } else if (config && !config->output_dir.empty()) {
    dataset = config->output_dir;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "--dataset is required");
  }
  if (f.report.empty()) throw Error(ErrorCode::kInvalidConfig, "--report is required");
  if (f.seed) options.seed = *f.seed;
  if (f.per_strategy) options.per_strategy = *f.per_strategy;
  if (f.negatives) options.negatives = *f.negatives;
  if (f.trials) options.trials = *f.trials;
  if (f.partition) {
    const auto p = parse_partition(*f.partition);
    if (!p) throw Error(ErrorCode::kInvalidConfig, "unknown partition '" + *f.partition + "'");
    options.partition = *p;
  }
  const auto outcome = run_report(dataset, f.report, options);
  out << outcome.document.dump(2) << "\n";
  return outcome.failures ? kExitFailures : kExitOk;
}

int cmd_synth(const Flags& f, std::ostream& out) {
  SynthConfig config;
  if (f.config) config = synth_config_from_json(read_json_file(*f.config));
  if (f.n) config.n = *f.n;
  if (!f.out) throw Error(ErrorCode::kInvalidConfig, "--out is required");
  const auto store = generate_synthetic(config, f.seed.value_or(0));
  save_store(store, *f.out);
  out << "wrote " << store.size() << " samples to " << *f.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Out-of-context image/caption dataset generator"};
  app.require_subcommand(1);
  Flags f;

  auto* validate = app.add_subcommand("validate", "Check a feature store");
  validate->add_option("--store", f.store, "Feature store directory")->required();

  auto* generate = app.add_subcommand("generate", "Build all dataset splits from a feature store");
  generate->add_option("--config", f.config, "Pipeline config (JSON)");
  generate->add_option("--store", f.store, "Feature store directory");
  generate->add_option("--out", f.out, "Output directory");
  generate->add_option("--seed", f.seed, "Merge shuffle seed");
  generate->add_option("--workers", f.workers, "Matcher threads (0 = auto)");
  generate->add_option("--chunk-size", f.chunk_size, "Samples per chunk");
  generate->add_option("--strategy", f.strategies, "Strategy to run (repeatable)");

  auto* report = app.add_subcommand("report", "Compute a report over generated outputs");
  report->add_option("--config", f.config, "Pipeline config (JSON)");
  report->add_option("--dataset,--out", f.dataset, "Generated dataset directory");
  report->add_option("--store", f.store, "Feature store directory");
  report->add_option("--report", f.report, "stats | overlap | cti-ratio | retrieval-sanity | audit | eval-subset")
      ->required();
  report->add_option("--seed", f.seed, "Sampling seed");
  report->add_option("--per-strategy", f.per_strategy, "eval-subset records per strategy");
  report->add_option("--partition", f.partition, "train | val | test (default test)");
  report->add_option("--negatives", f.negatives, "retrieval-sanity negatives per trial");
  report->add_option("--trials", f.trials, "retrieval-sanity trials");

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic feature store");
  synth->add_option("--config", f.config, "Synthetic store config (JSON)");
  synth->add_option("--out", f.out, "Output store directory")->required();
  synth->add_option("--seed", f.seed, "Generator seed");
  synth->add_option("--n", f.n, "Number of samples");

  // CLI11 wants argv-style input with the program name first.
  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("newsclip");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }

  try {
    if (*validate) return cmd_validate(f, out);
    if (*generate) return cmd_generate(f, out, err);
    if (*report) return cmd_report(f, out);
    return cmd_synth(f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
}

}  // namespace newsclip
