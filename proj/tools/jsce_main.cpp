#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "jsce/io.hpp"
#include "jsce/sweep.hpp"
#include "jsce/validate.hpp"

namespace {

void parse_seed_range(const std::string& text, jsce::ExperimentConfig& cfg) {
  const auto pos = text.find("..");
  if (pos == std::string::npos) {
    cfg.seed_lo = cfg.seed_hi = std::stoull(text);
    return;
  }
  cfg.seed_lo = std::stoull(text.substr(0, pos));
  cfg.seed_hi = std::stoull(text.substr(pos + 2));
}

int print_report(const jsce::validate::ValidationReport& rep) {
  std::printf("[%s] %s: %s\n", rep.pass ? "PASS" : "FAIL", rep.suite.c_str(), rep.detail.c_str());
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-sensing-IRS joint location sensing and channel estimation simulator"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run = app.add_subcommand("run", "Monte-Carlo sweep of the two-phase protocol");
  std::string config_path, profile = "desk", seeds, out_dir, axis;
  std::vector<std::string> schemes;
  bool emit_plots = false;
  int threads = -1;
  run->add_option("--config", config_path, "TOML config file");
  run->add_option("--profile", profile, "desk|paper")->check(CLI::IsMember({"desk", "paper"}));
  run->add_option("--scheme", schemes, "schemes to run (repeatable)");
  run->add_option("--seeds", seeds, "seed range a..b or single seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--axis", axis, "sweep axis: power|overlap|np");
  run->add_option("--threads", threads, "worker threads (0 = hardware)");
  run->add_flag("--emit-plots", emit_plots, "write per-figure plot CSVs");

  // ---- validate ----
  auto* validate = app.add_subcommand("validate", "standalone oracle checks");
  std::string suite = "all";
  validate->add_option("--suite", suite, "gradients|fim|bp|posterior|all")
      ->check(CLI::IsMember({"gradients", "fim", "bp", "posterior", "all"}));

  // ---- dump ----
  auto* dump = app.add_subcommand("dump", "write scene/channel/observation regression dumps");
  uint64_t dump_seed = 0;
  std::string dump_out = "dump";
  std::string dump_profile = "desk";
  dump->add_option("--seed", dump_seed, "scene seed");
  dump->add_option("--out", dump_out, "output directory");
  dump->add_option("--profile", dump_profile, "desk|paper");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      jsce::ExperimentConfig cfg = jsce::load_config(config_path, profile);
      cfg.profile = profile;
      if (profile == "paper")
        std::fprintf(stderr, "warning: paper profile uses full-size arrays and is slow\n");
      if (!schemes.empty()) cfg.schemes = schemes;
      if (!seeds.empty()) parse_seed_range(seeds, cfg);
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (!axis.empty()) cfg.sweep_axis = axis;
      if (threads >= 0) cfg.threads = threads;
      cfg.emit_plots = cfg.emit_plots || emit_plots;
      const auto outcome = jsce::run_sweep(cfg);
      std::printf("wrote %s/results.csv (%zu rows, %d failures)\n", cfg.out_dir.c_str(),
                  outcome.rows.size(), outcome.failures);
      return 0;
    }
    if (*validate) {
      int rc = 0;
      if (suite == "gradients" || suite == "all") rc |= print_report(jsce::validate::validate_gradients());
      if (suite == "fim" || suite == "all") rc |= print_report(jsce::validate::validate_fim());
      if (suite == "bp" || suite == "all") rc |= print_report(jsce::validate::validate_bp());
      if (suite == "posterior" || suite == "all") rc |= print_report(jsce::validate::validate_posterior());
      return rc;
    }
    if (*dump) {
      jsce::ExperimentConfig cfg =
          dump_profile == "paper" ? jsce::paper_profile() : jsce::desk_profile();
      std::filesystem::create_directories(dump_out);
      const auto grids = jsce::build_grids(cfg.scene.soi_R, cfg.scene.soi_Ru, cfg.Q, cfg.P);
      jsce::Rng rng_scene(dump_seed, 0), rng_chan(dump_seed, 1), rng_noise(dump_seed, 2);
      const auto truth = jsce::generate_truth(cfg.scene, grids, cfg.content, rng_scene);
      const auto ch = jsce::generate_channels(cfg.scene, truth, cfg.arrays, rng_chan, cfg.comm_pl);
      std::ofstream(dump_out + "/scene.json") << jsce::scene_to_json(cfg.scene, truth) << "\n";
      jsce::dump_channelset(dump_out + "/channels.bin", ch);

      const auto [off, imap] = jsce::assign_offsets(truth, grids);
      jsce::ReflectionSchedule sched;
      const auto span_R = jsce::angular_span(cfg.scene.soi_R, cfg.scene.p_I, cfg.scene.theta_I,
                                             jsce::AngleConvention::IRS);
      const auto span_Ru = jsce::angular_span(cfg.scene.soi_Ru, cfg.scene.p_I, cfg.scene.theta_I,
                                              jsce::AngleConvention::IRS);
      sched.phi_r = jsce::compensate_sensing(
          jsce::scanning_codebook(cfg.arrays.Np, cfg.T1, span_R.lo, span_R.hi), ch.h_CI);
      sched.phi_c = jsce::scanning_codebook(cfg.arrays.Np, cfg.T2, span_Ru.lo, span_Ru.hi);
      const auto dicts = jsce::build_dictionaries(cfg.scene, grids, off, cfg.arrays);
      const auto model = jsce::assemble_F(dicts, sched, ch.h_CI, ch.H_IB);
      jsce::dump_model(dump_out + "/model.bin", model);
      const auto obs =
          jsce::synthesize_observation(ch, sched, cfg.scene, cfg.arrays, rng_noise, 1.0, 1.0);
      jsce::dump_observation(dump_out + "/observation.bin", obs);
      std::printf("wrote scene.json, channels.bin, model.bin, observation.bin under %s\n",
                  dump_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
