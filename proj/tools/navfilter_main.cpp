// Command-line front-end. Subcommands pick the mode; the config file carries
// everything else, with --seed/--out/--backend as quick overrides. Exit code
// 0 means the run finished with no envelope breach (or, for validate, every
// property passed).

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "navfilter/runner.hpp"

namespace {

int log_level() {
  const char* env = std::getenv("NAVFILTER_LOG");
  if (!env) return 1;
  const std::string v(env);
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

void log_info(const char* fmt, const std::string& arg) {
  if (log_level() >= 1) std::fprintf(stderr, fmt, arg.c_str());
}

int run_mode(const navfilter::RunConfig& cfg) {
  const auto m = navfilter::run(cfg);
  if (log_level() >= 2) {
    for (const auto& s : m.errors)
      std::fprintf(stderr, "t=%.3f att=%.3g pos=%.3g vel=%.3g bg=%.3g ba=%.3g\n", s.t, s.n[0],
                   s.n[1], s.n[2], s.n[3], s.n[4]);
  }
  std::printf(
      "steps=%ld corrected=%ld envelope_violations=%ld "
      "final_att=%.6g final_pos=%.6g final_vel=%.6g final_bias_gyro=%.6g final_bias_accel=%.6g\n",
      m.steps, m.corrected_steps, m.envelope_violations, m.final_window_mean[0],
      m.final_window_mean[1], m.final_window_mean[2], m.final_window_mean[3],
      m.final_window_mean[4]);
  return m.ok() ? 0 : 1;
}

int validate_mode(const navfilter::RunConfig& cfg) {
  const auto rep = navfilter::validate(cfg);
  for (const auto& c : rep.checks)
    std::printf("%s %s: %s\n", c.pass ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Landmark-aided inertial navigation filter, batch runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::string backend;
  long long seed = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "override the output directory");
    sub->add_option("--backend", backend, "attitude backend: matrix | quaternion")
        ->check(CLI::IsMember({"matrix", "quaternion"}));
  };
  CLI::App* sim = app.add_subcommand("simulate", "run the built-in trajectory simulator");
  CLI::App* rep = app.add_subcommand("replay", "replay an imu + ground-truth CSV pair");
  CLI::App* val = app.add_subcommand("validate", "run the structural property checks");
  add_common(sim);
  add_common(rep);
  add_common(val);

  CLI11_PARSE(app, argc, argv);

  try {
    navfilter::RunConfig cfg = navfilter::load_config(config_path);
    if (sim->parsed()) cfg.mode = navfilter::RunMode::simulate;
    if (rep->parsed()) cfg.mode = navfilter::RunMode::replay;
    if (val->parsed()) cfg.mode = navfilter::RunMode::validate;
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (backend == "matrix") cfg.backend = navfilter::Backend::matrix;
    if (backend == "quaternion") cfg.backend = navfilter::Backend::quaternion;

    log_info("navfilter: writing outputs to %s\n", cfg.out_dir);
    return cfg.mode == navfilter::RunMode::validate ? validate_mode(cfg) : run_mode(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
