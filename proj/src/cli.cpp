#include "lrcssp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "lrcssp/experiment.hpp"

namespace lrcssp {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  unsigned jobs = 1;
  std::uint64_t seed_offset = 0;
};

ExperimentConfig config_or_default(const Options& o) {
  return o.config.empty() ? ExperimentConfig{} : load_config(o.config);
}

int cmd_gen(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  const LinearCsspModel model = resolve_model(cfg);
  const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
  fs::create_directories(dir);
  save_model(dir / "model.json", model);
  out << (dir / "model.json").string() << ' ' << model_fingerprint(model) << '\n';
  return kExitOk;
}

int cmd_run(const Options& o, std::ostream& out) {
  const ExperimentConfig cfg = load_config(o.config);
  const fs::path dir = o.out.empty() ? fs::path(cfg.output_dir) : fs::path(o.out);
  const ExperimentResult res = run_experiment(cfg, dir, RunControl{o.jobs, o.seed_offset});
  out << format_summary_table(res.summary);
  return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw ConfigError("report: no run directory given");
  const ReportResult rep = report_experiment(o.out);
  out << format_summary_table(rep.summary);
  for (const auto& p : rep.plot_files) out << "plot data: " << p.string() << '\n';
  for (const auto& m : rep.mismatches) err << "summary mismatch: " << m << '\n';
  return rep.mismatches.empty() ? kExitOk : kExitFailure;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear contextual SSP learner: instance generation, runs and reports", "lrcssp"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed-offset", o.seed_offset, "Added to every configured seed");
    sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* gen = app.add_subcommand("gen", "Generate (or load and validate) a model and write model.json");
  gen->add_option("--config", o.config, "Experiment config (JSON)");
  add_common(gen);
  CLI::App* runc = app.add_subcommand("run", "Run the learner and baselines over all seeds");
  runc->add_option("--config", o.config, "Experiment config (JSON)")->required();
  add_common(runc);
  CLI::App* report = app.add_subcommand("report", "Recompute summaries from a run directory");
  report->add_option("dir", o.out, "Run directory");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen(o, out);
    if (*runc) return cmd_run(o, out);
    return cmd_report(o, out, err);
  } catch (const std::invalid_argument& e) {
    err << "lrcssp: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "lrcssp: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace lrcssp
