// proagent: command-line driver for trace generation, replay, evaluation,
// distillation export and trace validation.
//
// Exit codes: 0 ok, 1 usage, 2 validation failure, 3 runtime error.

#include "proagent/distill.hpp"
#include "proagent/generator.hpp"
#include "proagent/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

#ifndef PROAGENT_DATA_DIR
#define PROAGENT_DATA_DIR "data"
#endif

namespace {

using namespace proagent;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  return out;
}

int cmd_gen_trace(const std::string& mix_path, std::uint64_t seed, const std::string& out_path, const std::string& bank_path,
                  const std::string& tools_path) {
  const auto mix = load_file(mix_path, [](std::istream& in) { return parse_mix(in); });
  const auto bank = load_file(bank_path, [](std::istream& in) { return load_bank(in); });
  const auto tools = load_file(tools_path, [](std::istream& in) { return load_registry(in); });
  GeneratorOptions opts;
  opts.seed = seed;
  const auto g = generate_trace(mix, bank, tools, opts);
  auto out = open_out(out_path);
  write_trace(out, g.trace);
  auto side = open_out(out_path + ".truth.json");
  side << g.sidecar.dump(2) << '\n';
  std::cout << "wrote " << g.trace.events.size() << " events, " << g.sidecar["annotation_count"] << " annotations to "
            << out_path << '\n';
  return kExitOk;
}

int cmd_make_script(const std::string& sidecar_path, double tolerance, const std::string& out_path) {
  const json sidecar = json::parse(read_file(sidecar_path), nullptr, false);
  if (sidecar.is_discarded() || !sidecar.contains("annotations")) throw FormatError("not a generator sidecar: " + sidecar_path);
  auto out = open_out(out_path);
  write_script(out, oracle_script(sidecar, tolerance), std::nullopt);
  return kExitOk;
}

int cmd_replay(const std::string& config_path, const std::string& out_path) {
  const auto cfg = load_config(config_path);
  auto pipeline = Pipeline::from_config(cfg);
  const RunLog log = pipeline.run();
  auto out = open_out(out_path);
  write_run_log(out, log);
  std::size_t delivered = 0;
  for (const auto& inv : log.invocations) delivered += inv.delivered ? 1 : 0;
  std::cout << log.samples.size() << " samples, " << log.invocations.size() << " invocations, " << delivered
            << " delivered, " << log.dropped_frames << " dropped\n";
  return kExitOk;
}

BaselineParams baseline_params(const RunLog& run) {
  PipelineConfig cfg;
  for (const auto& [k, v] : run.config) {
    try {
      cfg.set(k, v);
    } catch (const ConfigError&) {
      // unknown keys from other versions do not matter for baselines
    }
  }
  BaselineParams p;
  p.high_interval_s = cfg.sampling.high_interval_s;
  p.low_interval_s = cfg.sampling.low_interval_s;
  p.tick_s = cfg.sampling.tick_s;
  p.context = cfg.context;
  return p;
}

int cmd_eval(const std::string& run_path, const std::string& trace_path, double tolerance, const std::string& out_path,
             const std::string& tools_path) {
  const RunLog run = load_file(run_path, [](std::istream& in) { return read_run_log(in); });
  const Trace trace = load_file(trace_path, [](std::istream& in) { return parse_trace(in); });
  if (std::abs(run.duration_s - trace.duration_s) > 1e-9)
    throw FormatError("run log duration " + format_fixed(run.duration_s, 3) + " s does not match trace duration " +
                      format_fixed(trace.duration_s, 3) + " s");
  const auto tools = load_file(tools_path, [](std::istream& in) { return load_registry(in); });
  EvalReport report = evaluate(run, trace, tools, tolerance);

  const BaselineParams params = baseline_params(run);
  const bool has_annotations = !trace.annotation_times().empty();
  for (const char* name : {"periodic-1", "periodic-5", "periodic-10", "periodic-20", "periodic-60", "motion-trigger",
                           "conversation-trigger", "diff-filter"}) {
    const auto samples = run_baseline(name, trace, params);
    json b{{"name", name}, {"samples", samples.size()}, {"sampling_ratio", sampling_ratio(samples, trace.duration_s)}};
    b["recall"] = has_annotations ? json(recall_sampling(samples, trace, tolerance)) : json(nullptr);
    report.baselines.push_back(std::move(b));
  }
  auto out = open_out(out_path);
  out << report.to_json().dump(2) << '\n';
  auto show = [](const std::optional<double>& v) { return v ? format_fixed(*v, 4) : std::string("n/a"); };
  std::cout << "acc_p=" << show(report.acc_p) << " md=" << show(report.md) << " f1=" << show(report.f1)
            << " acc_args=" << show(report.acc_args) << " recall=" << show(report.recall)
            << " sampling_ratio=" << format_fixed(report.sampling_ratio, 4) << '\n';
  return kExitOk;
}

int cmd_export_distill(const std::string& trace_path, const std::string& config_path, const std::string& out_path) {
  PipelineConfig cfg = load_config(config_path);
  const Trace trace = load_file(trace_path, [](std::istream& in) { return parse_trace(in); });
  const auto pois = load_file(cfg.resolve(cfg.pois), [](std::istream& in) { return load_pois(in); });
  const auto bank = load_file(cfg.resolve(cfg.bank), [](std::istream& in) { return load_bank(in); });
  const auto store = load_file(cfg.resolve(cfg.personas), [](std::istream& in) { return load_personas(in); });
  auto backend = make_backend(cfg.thought_backend.empty() ? cfg.backend : cfg.thought_backend, cfg);
  DistillOptions opts;
  opts.negative_ratio = cfg.negative_ratio;
  opts.seed = cfg.seed;
  opts.context = cfg.context;
  opts.top_k = cfg.top_k;
  opts.max_listed_pois = cfg.max_listed_pois;
  opts.fallback_scenario = cfg.fallback_scenario;
  const auto records = export_distillation(trace, *backend, store, bank, make_embedder(cfg.embedder, cfg), pois, opts);
  auto out = open_out(out_path);
  for (const auto& r : records) out << r.to_json().dump() << '\n';
  std::cout << "wrote " << records.size() << " distillation records\n";
  return kExitOk;
}

int cmd_validate(const std::string& trace_path, double gap_s) {
  const Trace trace = load_file(trace_path, [](std::istream& in) { return parse_trace(in); });
  const ValidationReport report = validate_trace(trace, gap_s);
  std::cout << report.to_json().dump(2) << '\n';
  return report.ok() ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proactive agent trace replay and evaluation"};
  app.require_subcommand(1);
  const std::string data_dir = PROAGENT_DATA_DIR;

  std::string mix, out, bank = data_dir + "/bank.jsonl", tools = data_dir + "/tools.jsonl";
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-trace", "Generate a seeded synthetic trace and its ground-truth sidecar");
  gen->add_option("--mix", mix, "Scenario mix (one JSON object per line)")->required()->check(CLI::ExistingFile);
  gen->add_option("--seed", seed, "Generator seed")->required();
  gen->add_option("--out", out, "Trace output path; the sidecar goes to <out>.truth.json")->required();
  gen->add_option("--bank", bank, "Scenario-object bank")->check(CLI::ExistingFile);
  gen->add_option("--tools", tools, "Tool manifest")->check(CLI::ExistingFile);

  std::string sidecar;
  double tolerance = kDefaultToleranceS;
  auto* script = app.add_subcommand("make-script", "Build a scripted backend that echoes a sidecar's annotations");
  script->add_option("--sidecar", sidecar, "Generator sidecar")->required()->check(CLI::ExistingFile);
  script->add_option("--tolerance", tolerance, "Half-width of each proactive window in seconds");
  script->add_option("--out", out, "Script output path")->required();

  std::string config;
  auto* replay = app.add_subcommand("replay", "Replay a trace through the pipeline");
  replay->add_option("--config", config, "Pipeline config")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out, "Run log output path")->required();

  std::string run, trace;
  auto* eval = app.add_subcommand("eval", "Score a run log against a trace and compare baselines");
  eval->add_option("--run", run, "Run log")->required()->check(CLI::ExistingFile);
  eval->add_option("--trace", trace, "Ground-truth trace")->required()->check(CLI::ExistingFile);
  eval->add_option("--tolerance", tolerance, "Alignment tolerance in seconds")->check(CLI::PositiveNumber);
  eval->add_option("--out", out, "Report output path")->required();
  eval->add_option("--tools", tools, "Tool manifest for argument validation")->check(CLI::ExistingFile);

  auto* distill = app.add_subcommand("export-distill", "Emit CoT distillation training records");
  distill->add_option("--trace", trace, "Annotated trace")->required()->check(CLI::ExistingFile);
  distill->add_option("--config", config, "Pipeline config")->required()->check(CLI::ExistingFile);
  distill->add_option("--out", out, "Records output path")->required();

  double gap_s = 10.0;
  auto* validate = app.add_subcommand("validate", "Check a trace and report counts, gaps and violations");
  validate->add_option("--trace", trace, "Trace file")->required()->check(CLI::ExistingFile);
  validate->add_option("--gap", gap_s, "Report per-modality gaps longer than this many seconds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_trace(mix, seed, out, bank, tools);
    if (*script) return cmd_make_script(sidecar, tolerance, out);
    if (*replay) return cmd_replay(config, out);
    if (*eval) return cmd_eval(run, trace, tolerance, out, tools);
    if (*distill) return cmd_export_distill(trace, config, out);
    if (*validate) return cmd_validate(trace, gap_s);
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
