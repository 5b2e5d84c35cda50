#include "lrcssp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace lrcssp {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("missing file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const fs::path& where) {
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ConfigError("malformed number '" + s + "' in " + where.string());
  return x;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  if (v[lo] == v[hi]) return v[lo];
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double as_double(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::vector<std::string> variants_of(const ExperimentConfig& cfg) {
  std::vector<std::string> out{kVariants[0]};
  if (cfg.baselines.context_blind) out.push_back(kVariants[1]);
  return out;
}

constexpr const char* kRegretHeader =
    "episode,steps,realized_loss,optimal_value,regret,cum_regret,intervals,unknown_triggers,truncated,b_star_cur";

void run_one(const ExperimentConfig& cfg, const LinearCsspModel& model, const std::string& variant,
             std::uint64_t seed, const fs::path& dir) {
  const auto contexts = experiment_contexts(cfg, model.d, seed);
  const OracleValues oracle = oracle_values(model, contexts);
  const LearnerConfig lc = effective_learner(cfg, model, contexts, oracle);
  RunOptions opt;
  opt.context_blind = variant == "context_blind";
  opt.record_trajectory = cfg.record_trajectories;
  const RunLog log = run(lc, model, contexts, derive_seed(seed, 2), opt);
  const RegretCurve curve = compute_regret(log, oracle);

  fs::create_directories(dir);
  write_regret_csv(dir / "regret.csv", curve);
  write_oracle_csv(dir / "oracle.csv", oracle);
  write_events_jsonl(dir / "events.jsonl", log);
  if (cfg.record_trajectories) write_trajectory_csv(dir / "trajectory.csv", log);
}

void run_parallel(std::vector<std::function<void()>>& tasks, unsigned jobs) {
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto workers = static_cast<unsigned>(std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t t; (t = next++) < tasks.size();) {
          try {
            tasks[t]();
          } catch (...) {
            errors[t] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto os = open_out(path);
  os << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace

Json json_number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

LinearCsspModel resolve_model(const ExperimentConfig& cfg) {
  LinearCsspModel model = cfg.model_file.empty() ? generate_instance(cfg.generator) : load_model(cfg.model_file);
  const auto bad = validate_model(model);
  if (!bad.empty()) throw ConfigError("model: " + bad.front().describe());
  return model;
}

std::vector<Context> experiment_contexts(const ExperimentConfig& cfg, Index d, std::uint64_t seed) {
  ContextSpec spec;
  spec.kind = cfg.contexts.kind;
  if (spec.kind == ContextKind::fixed) {
    spec.fixed = Eigen::Map<const Eigen::VectorXd>(cfg.contexts.fixed.data(),
                                                    static_cast<Index>(cfg.contexts.fixed.size()));
    if (spec.fixed.size() != d) throw ConfigError("contexts.fixed has the wrong dimension");
  }
  Rng rng = derive_rng(seed, 1);
  return context_sequence(spec, cfg.contexts.K, d, rng);
}

LearnerConfig effective_learner(const ExperimentConfig& cfg, const LinearCsspModel& model,
                                std::span<const Context> contexts, const OracleValues& oracle) {
  LearnerConfig lc = cfg.learner;
  if (!cfg.oracle_informed) return lc;
  lc.b_star_init = std::max(oracle.b_star_emp, 1.0);  // the learner requires B >= 1
  double l_min = 1.0;
  for (const Context& c : contexts) l_min = std::min(l_min, induce_ssp(model, c).loss.minCoeff());
  if (l_min > 0.0) lc.l_min = l_min;
  return lc;
}

void write_regret_csv(const fs::path& path, const RegretCurve& curve) {
  auto os = open_out(path);
  os << kRegretHeader << '\n';
  for (const auto& r : curve.rows) {
    os << r.episode << ',' << r.steps << ',' << fmt(r.realized_loss) << ',' << fmt(r.optimal_value) << ','
       << fmt(r.regret) << ',' << fmt(r.cum_regret) << ',' << r.intervals << ',' << r.unknown_triggers << ','
       << (r.truncated ? 1 : 0) << ',' << fmt(r.b_star_cur) << '\n';
  }
}

std::vector<RegretRow> read_regret_csv(const fs::path& path) {
  std::istringstream is(read_text(path));
  std::string line;
  if (!std::getline(is, line) || line != kRegretHeader) throw ConfigError("bad header in " + path.string());
  std::vector<RegretRow> rows;
  while (std::getline(is, line)) {
    const auto f = split(line, ',');
    if (f.size() != 10) throw ConfigError("bad row in " + path.string());
    RegretRow r;
    r.episode = static_cast<Index>(parse_double(f[0], path));
    r.steps = static_cast<Index>(parse_double(f[1], path));
    r.realized_loss = parse_double(f[2], path);
    r.optimal_value = parse_double(f[3], path);
    r.regret = parse_double(f[4], path);
    r.cum_regret = parse_double(f[5], path);
    r.intervals = static_cast<Index>(parse_double(f[6], path));
    r.unknown_triggers = static_cast<Index>(parse_double(f[7], path));
    r.truncated = f[8] == "1";
    r.b_star_cur = parse_double(f[9], path);
    rows.push_back(r);
  }
  return rows;
}

void write_oracle_csv(const fs::path& path, const OracleValues& oracle) {
  auto os = open_out(path);
  os << "episode,v_star_init,b_star_ctx,t_star_ctx\n";
  for (std::size_t k = 0; k < oracle.episodes.size(); ++k) {
    const auto& e = oracle.episodes[k];
    os << k << ',' << fmt(e.v_star_init) << ',' << fmt(e.b_star_ctx) << ',' << fmt(e.t_star_ctx) << '\n';
  }
}

void write_events_jsonl(const fs::path& path, const RunLog& log) {
  auto os = open_out(path);
  for (const auto& ep : log.episodes) {
    for (const auto& iv : ep.intervals) {
      Json j;
      j["episode"] = iv.episode;
      j["m"] = iv.m;
      j["trigger"] = to_string(iv.trigger);
      j["trigger_pair"] = iv.trigger_pair;
      j["start_step"] = iv.start_step;
      j["steps"] = iv.steps;
      j["interval_loss"] = iv.interval_loss;
      j["evi_residual"] = iv.evi_residual;
      j["evi_converged"] = iv.evi_converged;
      j["v_tilde_init"] = iv.v_tilde_init;
      j["b_star_cur"] = iv.b_star_cur;
      j["known_fraction"] = iv.known_fraction;
      j["reset"] = iv.reset;
      os << j.dump() << '\n';
    }
  }
}

void write_trajectory_csv(const fs::path& path, const RunLog& log) {
  auto os = open_out(path);
  os << "episode,step,s,a,next,loss\n";
  for (std::size_t k = 0; k < log.episodes.size(); ++k) {
    const auto& tr = log.episodes[k].trajectory;
    for (std::size_t t = 0; t < tr.size(); ++t)
      os << k << ',' << t << ',' << tr[t].s << ',' << tr[t].a << ',' << tr[t].next << ',' << fmt(tr[t].loss) << '\n';
  }
}

Json summarize_run_dir(const fs::path& dir, const std::string& variant, std::uint64_t seed, double delta,
                       const ProblemShape& shape) {
  const auto rows = read_regret_csv(dir / "regret.csv");

  double b_star_emp = 0.0;
  double t_star_emp = 0.0;
  {
    std::istringstream is(read_text(dir / "oracle.csv"));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      const auto f = split(line, ',');
      if (f.size() != 4) throw ConfigError("bad row in " + (dir / "oracle.csv").string());
      b_star_emp = std::max(b_star_emp, parse_double(f[2], dir));
      t_star_emp = std::max(t_star_emp, parse_double(f[3], dir));
    }
  }

  Index intervals = 0, violations = 0, doublings = 0;
  std::vector<Index> unknown(static_cast<std::size_t>(shape.n_states * shape.n_actions), 0);
  {
    std::istringstream is(read_text(dir / "events.jsonl"));
    std::string line;
    while (std::getline(is, line)) {
      const Json e = Json::parse(line);
      intervals += 1;
      if (e["interval_loss"].get<double>() > hpe_interval_bound(b_star_emp, e["m"].get<Index>(), delta))
        violations += 1;
      if (e["reset"].get<bool>()) doublings += 1;
      const Index p = e["trigger_pair"].get<Index>();
      if (p >= 0 && p < static_cast<Index>(unknown.size())) unknown[static_cast<std::size_t>(p)] += 1;
    }
  }

  Index steps = 0, truncations = 0;
  for (const auto& r : rows) {
    steps += r.steps;
    if (r.truncated) truncations += 1;
  }
  RegretCurve curve{rows, truncations};
  const RegretSlope slope = regret_slope(curve.rows);
  const Index max_unknown = unknown.empty() ? 0 : *std::max_element(unknown.begin(), unknown.end());
  const auto K = static_cast<Index>(rows.size());

  Json j;
  j["variant"] = variant;
  j["seed"] = seed;
  j["episodes"] = K;
  j["total_steps"] = steps;
  j["total_intervals"] = intervals;
  j["truncations"] = truncations;
  j["doublings"] = doublings;
  j["final_cum_regret"] = json_number(curve.final_cum_regret());
  j["early_mean_regret"] = json_number(slope.early_mean);
  j["late_mean_regret"] = json_number(slope.late_mean);
  j["slope_ratio"] = json_number(slope.ratio);
  j["hpe_violations"] = violations;
  j["hpe_violation_fraction"] =
      json_number(intervals ? static_cast<double>(violations) / static_cast<double>(intervals) : 0.0);
  j["b_star_emp"] = json_number(b_star_emp);
  j["t_star_emp"] = json_number(t_star_emp);
  j["max_unknown_per_pair"] = max_unknown;
  j["interval_count_bound_holds"] = intervals <= K + shape.n_states * shape.n_actions * max_unknown;
  return j;
}

Json summarize_experiment(const fs::path& out) {
  const ExperimentConfig cfg = config_from_json(Json::parse(read_text(out / "config.json")));
  const LinearCsspModel model = load_model(out / "model.json");
  const ProblemShape shape{model.d, model.n_states, model.n_actions};

  Json runs = Json::array();
  Json table = Json::array();
  for (const auto& variant : variants_of(cfg)) {
    std::vector<double> finals, ratios, hpe;
    Index truncations = 0;
    for (std::uint64_t seed : cfg.seeds) {
      const fs::path dir = out / variant / seed_dir(seed);
      Json s = summarize_run_dir(dir, variant, seed, cfg.learner.delta, shape);
      finals.push_back(as_double(s["final_cum_regret"]));
      ratios.push_back(as_double(s["slope_ratio"]));
      hpe.push_back(as_double(s["hpe_violation_fraction"]));
      truncations += s["truncations"].get<Index>();
      runs.push_back(std::move(s));
    }
    Json row;
    row["variant"] = variant;
    row["runs"] = finals.size();
    row["final_cum_regret"] = {{"mean", json_number(mean(finals))},
                               {"median", json_number(quantile(finals, 0.5))},
                               {"q25", json_number(quantile(finals, 0.25))},
                               {"q75", json_number(quantile(finals, 0.75))}};
    row["slope_ratio"] = {{"mean", json_number(mean(ratios))}, {"median", json_number(quantile(ratios, 0.5))}};
    row["hpe_violation_fraction_mean"] = json_number(mean(hpe));
    row["truncations"] = truncations;
    table.push_back(std::move(row));
  }
  Json j;
  j["format"] = "lrcssp-summary";
  j["version"] = 1;
  j["model_fingerprint"] = model_fingerprint(model);
  j["variants"] = std::move(table);
  j["runs"] = std::move(runs);
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in, const fs::path& out, const RunControl& ctl) {
  ExperimentConfig cfg = cfg_in;
  for (auto& s : cfg.seeds) s += ctl.seed_offset;
  cfg.output_dir = out.string();
  const LinearCsspModel model = resolve_model(cfg);

  fs::create_directories(out);
  write_text(out / "config.json", dump(config_to_json(cfg)));
  save_model(out / "model.json", model);

  std::vector<std::function<void()>> tasks;
  for (const auto& variant : variants_of(cfg)) {
    for (std::uint64_t seed : cfg.seeds) {
      tasks.emplace_back([&cfg, &model, variant, seed, dir = out / variant / seed_dir(seed)] {
        run_one(cfg, model, variant, seed, dir);
      });
    }
  }
  run_parallel(tasks, ctl.jobs);

  Json summary = summarize_experiment(out);
  for (const auto& r : summary["runs"])
    write_text(out / r["variant"].get<std::string>() / seed_dir(r["seed"].get<std::uint64_t>()) / "summary.json",
               dump(r));
  write_text(out / "summary.json", dump(summary));
  return {out, std::move(summary)};
}

ReportResult report_experiment(const fs::path& out) {
  if (!fs::is_directory(out) || !fs::exists(out / "config.json"))
    throw ConfigError(out.string() + " does not hold an experiment");
  ReportResult rep;
  rep.summary = summarize_experiment(out);

  auto compare = [&](const fs::path& path, const Json& j) {
    if (!fs::exists(path) || read_text(path) != dump(j)) rep.mismatches.push_back(path.string());
  };
  compare(out / "summary.json", rep.summary);
  for (const auto& r : rep.summary["runs"])
    compare(out / r["variant"].get<std::string>() / seed_dir(r["seed"].get<std::uint64_t>()) / "summary.json", r);

  const ExperimentConfig cfg = config_from_json(Json::parse(read_text(out / "config.json")));
  for (const auto& variant : variants_of(cfg)) {
    std::vector<std::vector<RegretRow>> curves;
    for (std::uint64_t seed : cfg.seeds) curves.push_back(read_regret_csv(out / variant / seed_dir(seed) / "regret.csv"));
    const fs::path path = out / ("plot_" + variant + ".csv");
    auto os = open_out(path);
    os << "episode,mean_cum_regret,q25_cum_regret,q75_cum_regret\n";
    const std::size_t K = curves.front().size();
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> v;
      for (const auto& c : curves) {
        if (c.size() != K) throw ConfigError("runs of " + variant + " have different lengths");
        v.push_back(c[k].cum_regret);
      }
      os << k << ',' << fmt(mean(v)) << ',' << fmt(quantile(v, 0.25)) << ',' << fmt(quantile(v, 0.75)) << '\n';
    }
    rep.plot_files.push_back(path);
  }
  return rep;
}

std::string format_summary_table(const Json& summary) {
  auto num = [](const Json& j) { return fmt(as_double(j)); };
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %5s %14s %14s %14s %14s %12s %11s\n", "variant", "runs", "regret_mean",
                "regret_median", "regret_q25", "regret_q75", "slope_ratio", "truncations");
  os << buf;
  for (const auto& row : summary["variants"]) {
    const auto& f = row["final_cum_regret"];
    std::snprintf(buf, sizeof buf, "%-14s %5zu %14s %14s %14s %14s %12s %11lld\n",
                  row["variant"].get<std::string>().c_str(), row["runs"].get<std::size_t>(), num(f["mean"]).c_str(),
                  num(f["median"]).c_str(), num(f["q25"]).c_str(), num(f["q75"]).c_str(),
                  num(row["slope_ratio"]["mean"]).c_str(), static_cast<long long>(row["truncations"].get<Index>()));
    os << buf;
  }
  os << '\n';
  std::snprintf(buf, sizeof buf, "%-14s %8s %14s %12s %8s %10s %10s\n", "run", "seed", "final_regret", "slope_ratio",
                "trunc", "hpe_viol", "b_star_emp");
  os << buf;
  for (const auto& r : summary["runs"]) {
    std::snprintf(buf, sizeof buf, "%-14s %8llu %14s %12s %8lld %10s %10s\n", r["variant"].get<std::string>().c_str(),
                  static_cast<unsigned long long>(r["seed"].get<std::uint64_t>()),
                  num(r["final_cum_regret"]).c_str(), num(r["slope_ratio"]).c_str(),
                  static_cast<long long>(r["truncations"].get<Index>()), num(r["hpe_violation_fraction"]).c_str(),
                  num(r["b_star_emp"]).c_str());
    os << buf;
  }
  return os.str();
}

}  // namespace lrcssp
