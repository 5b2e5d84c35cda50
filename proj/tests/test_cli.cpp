#include <doctest.h>

#include <fstream>
#include <sstream>

#include "lrcssp/cli.hpp"
#include "lrcssp/experiment.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace lrcssp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lrcssp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

const fs::path kReference = fs::path(LRCSSP_SOURCE_DIR) / "configs" / "reference.json";

// Small enough to run in well under a second.
const char* kTiny = R"({
  "generator": {"d": 2, "n_states": 3, "n_actions": 2, "gamma_goal": 0.2, "seed": 4},
  "contexts": {"K": 40},
  "seeds": [1, 2]
})";

}  // namespace

TEST_CASE("cli: usage errors exit with 2, help with 0") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"run"}).code == kExitUsage);  // --config is required
  CHECK(cli({"run", "--config", "x.json", "--jobs", "0"}).code == kExitUsage);
  CHECK(cli({"run", "--config", "x.json", "--seed-offset", "abc"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"run", "--help"}).code == kExitOk);
}

TEST_CASE("cli: config errors exit with 2") {
  TempDir t("cli_cfg");
  CHECK(cli({"run", "--config", (t.path / "missing.json").string()}).code == kExitUsage);

  write(t.path / "gamma.json", R"({"generator": {"gamma_goal": 0.0}})");
  const Result g = cli({"run", "--config", (t.path / "gamma.json").string(), "--out", (t.path / "o").string()});
  CHECK(g.code == kExitUsage);
  CHECK(g.err.find("gamma") != std::string::npos);

  write(t.path / "unknown.json", R"({"learner": {"delat": 0.1}})");
  CHECK(cli({"run", "--config", (t.path / "unknown.json").string()}).code == kExitUsage);

  write(t.path / "nomodel.json", R"({"model_file": ")" + (t.path / "nope.json").string() + R"("})");
  CHECK(cli({"gen", "--config", (t.path / "nomodel.json").string(), "--out", t.path.string()}).code ==
        kExitUsage);

  write(t.path / "broken.json", "{ not json");
  CHECK(cli({"run", "--config", (t.path / "broken.json").string()}).code == kExitUsage);

  CHECK(cli({"report", (t.path / "nothing_here").string()}).code == kExitUsage);
  CHECK(cli({"report"}).code == kExitUsage);
}

TEST_CASE("cli: the reference config validates and gen is reproducible") {
  TempDir t("cli_gen");
  const Result a = cli({"gen", "--config", kReference.string(), "--out", (t.path / "a").string()});
  const Result b = cli({"gen", "--config", kReference.string(), "--out", (t.path / "b").string()});
  REQUIRE(a.code == kExitOk);
  REQUIRE(b.code == kExitOk);
  const LinearCsspModel m = load_model(t.path / "a" / "model.json");
  CHECK(validate_model(m).empty());
  CHECK(a.out.find(model_fingerprint(m)) != std::string::npos);
  CHECK(slurp(t.path / "a" / "model.json") == slurp(t.path / "b" / "model.json"));
  CHECK(m == resolve_model(load_config(kReference)));

  // A model written by gen can be fed back through model_file.
  write(t.path / "from_file.json", R"({"model_file": ")" + (t.path / "a" / "model.json").string() + R"("})");
  const Result c = cli({"gen", "--config", (t.path / "from_file.json").string(), "--out", (t.path / "c").string()});
  CHECK(c.code == kExitOk);
  CHECK(slurp(t.path / "a" / "model.json") == slurp(t.path / "c" / "model.json"));
}

TEST_CASE("cli: run, report and seed offset") {
  TempDir t("cli_run");
  write(t.path / "tiny.json", kTiny);
  const std::string cfg = (t.path / "tiny.json").string();
  const Result r = cli({"run", "--config", cfg, "--out", (t.path / "a").string(), "--jobs", "2"});
  REQUIRE(r.code == kExitOk);
  for (const auto& v : kVariants) CHECK(r.out.find(v) != std::string::npos);

  const Result rep = cli({"report", (t.path / "a").string()});
  CHECK(rep.code == kExitOk);
  CHECK(rep.err.empty());
  CHECK(cli({"report", "--out", (t.path / "a").string()}).code == kExitOk);
  CHECK(slurp(t.path / "a" / "summary.json").find("lrcssp-summary") != std::string::npos);

  const Result off = cli({"run", "--config", cfg, "--out", (t.path / "b").string(), "--seed-offset", "1"});
  REQUIRE(off.code == kExitOk);
  CHECK(slurp(t.path / "a" / "lr_cssp" / "seed_2" / "regret.csv") ==
        slurp(t.path / "b" / "lr_cssp" / "seed_2" / "regret.csv"));
  CHECK(fs::exists(t.path / "b" / "lr_cssp" / "seed_3"));
  CHECK(!fs::exists(t.path / "b" / "lr_cssp" / "seed_1"));

  write(t.path / "a" / "context_blind" / "seed_1" / "summary.json", "{}\n");
  const Result bad = cli({"report", (t.path / "a").string()});
  CHECK(bad.code == kExitFailure);
  CHECK(bad.err.find("mismatch") != std::string::npos);
}

TEST_CASE("config: canonical round trip") {
  const ExperimentConfig ref = load_config(kReference);
  const Json j = config_to_json(ref);
  const ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back).dump() == j.dump());
  CHECK(back.seeds.size() == 10);
  CHECK(!back.learner.epsilon_perturb.has_value());
  CHECK(j["learner"]["epsilon_perturb"] == "auto");

  // Defaults fill in missing keys; the canonical order does not depend on input order.
  const Json a = config_to_json(config_from_json(Json::parse(R"({"seeds": [3], "contexts": {"K": 5}})")));
  const Json b = config_to_json(config_from_json(Json::parse(R"({"contexts": {"K": 5}, "seeds": [3]})")));
  CHECK(a.dump() == b.dump());
  CHECK(a["contexts"]["K"] == 5);

  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"extra": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"generator": {"loss_noise": {"kind": "x"}}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"contexts": {"K": 0}})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"contexts": {"kind": "fixed", "fixed": [0.7, 0.7]}})")),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"seeds": []})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"learner": {"epsilon_perturb": "big"}})")), ConfigError);
}

TEST_CASE("io: model and estimate round trips") {
  const LinearCsspModel m = oracle::small_model(9, 3, 4, 2);
  TempDir t("io");
  save_model(t.path / "m.json", m);
  const LinearCsspModel back = load_model(t.path / "m.json");
  CHECK(back == m);
  CHECK(model_fingerprint(back) == model_fingerprint(m));

  LinearCsspModel other = m;
  other.loss_embed(0, 0) += 1e-9;
  CHECK(model_fingerprint(other) != model_fingerprint(m));

  const ProblemShape shape{3, 4, 2};
  Rng rng(1);
  std::vector<SaStatisticsd> stats(8, SaStatisticsd(3, 4, 1.0));
  for (int i = 0; i < 100; ++i) {
    const Context c = sample_uniform_context(3, rng);
    const Index k = i % 8;
    const StepOutcome o = sample_step(m, c, k / 2, k % 2, rng);
    stats[static_cast<std::size_t>(k)].record_visit(c.weights, o.next, o.loss);
  }
  Estimates est;
  for (const auto& st : stats) est.push_back(estimate_pair(st, shape, 0.1));
  ProblemShape got{};
  const Estimates rt = estimates_from_json(estimates_to_json(est, shape), &got);
  CHECK(got.d == 3);
  CHECK(got.n_states == 4);
  REQUIRE(rt.size() == est.size());
  for (std::size_t k = 0; k < est.size(); ++k) {
    CHECK(rt[k].l_hat == est[k].l_hat);
    CHECK(rt[k].p_hat == est[k].p_hat);
    CHECK(rt[k].p_hat_raw == est[k].p_hat_raw);
    CHECK(rt[k].beta_dyn == est[k].beta_dyn);
    CHECK(rt[k].tau == est[k].tau);
  }

  Json broken = model_to_json(m);
  broken["fingerprint"] = "0000000000000000";
  write(t.path / "broken.json", broken.dump());
  CHECK_THROWS_AS(load_model(t.path / "broken.json"), ConfigError);
}
