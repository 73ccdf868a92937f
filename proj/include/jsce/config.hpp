#pragma once

#include <map>
#include <string>
#include <vector>

#include "jsce/baselines.hpp"
#include "jsce/channel.hpp"
#include "jsce/estep.hpp"
#include "jsce/mstep.hpp"
#include "jsce/rcg.hpp"
#include "jsce/scene.hpp"

namespace jsce {

/// Flat TOML-style reader: [section] headers, key = value lines, # comments.
/// Values: numbers, booleans, "strings", and arrays of those.
class MiniToml {
 public:
  static MiniToml parse_file(const std::string& path);
  static MiniToml parse(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_double_array(const std::string& key,
                                       const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_array(const std::string& key,
                                            const std::vector<std::string>& fallback) const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;  // "section.key" -> raw value
};

/// Full experiment description; defaults give the desk-scale profile.
struct ExperimentConfig {
  SceneConfig scene;
  ArraySpec arrays{32, 48, 32};
  int Q = 36, P = 9;
  SceneContent content{1, 2, 1, 1.0};
  CommPathLoss comm_pl;

  int T1 = 2, T2 = 2, T3 = 2, T4 = 2;

  std::vector<double> pt_dbm = {0.0, 5.0, 10.0};
  double sweep_pt_dbm = 5.0;  // fixed power for the overlap sweep
  double np_pt_dbm = 10.0;    // fixed power for the element-count sweep
  std::vector<double> overlap_ratios = {0.1, 0.25, 0.4};
  std::vector<int> np_values = {24, 48, 96};
  int overlap_KB = 2, overlap_LB = 3;  // content used by the overlap sweep

  uint64_t seed_lo = 0, seed_hi = 99;
  std::vector<std::string> schemes = {"as-tvbi", "tp-omp", "tp-sbl", "sp-tvbi", "genie"};
  std::string sweep_axis = "power";  // power | overlap | np

  // prior hyperparameters (paper naming)
  double prior_a = 1.0, prior_b_scale = 1.0;
  double prior_a_bar = 1.0, prior_b_bar = 1e-4;
  double mrf_alpha = 0.3, mrf_beta = 0.5;
  double p_T_override = -1.0, p_NL_override = -1.0, p_L_override = -1.0;

  EStepConfig estep;
  MStepConfig mstep;
  RcgConfig rcg;
  SblConfig sbl;

  std::string out_dir = "out";
  bool emit_plots = false;
  int threads = 0;  // 0 = hardware concurrency
  std::string profile = "desk";

  int K() const { return 2 * content.K_B; }
  int L() const { return 2 * content.L_B; }

  void validate() const;
};

/// Desk profile: the default-constructed config.
ExperimentConfig desk_profile();

/// Full-paper profile (large arrays; slow — guarded by a runtime warning).
ExperimentConfig paper_profile();

/// Profile + file + overrides resolution.
ExperimentConfig load_config(const std::string& path_or_empty, const std::string& profile);

/// Applies TOML entries onto a config (used for both files and CLI overrides).
void apply_toml(ExperimentConfig& cfg, const MiniToml& toml);

/// FNV-1a hash over the canonical serialized config, for reproducibility
/// metadata.
uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_to_string(const ExperimentConfig& cfg);

}  // namespace jsce
