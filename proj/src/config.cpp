#include "jsce/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace jsce {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_array(const std::string& raw) {
  std::vector<std::string> items;
  std::string body = trim(raw);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    throw ConfigError("expected array value: " + raw);
  body = body.substr(1, body.size() - 2);
  std::string cur;
  for (char c : body) {
    if (c == ',') {
      if (!trim(cur).empty()) items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

MiniToml MiniToml::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

MiniToml MiniToml::parse(const std::string& text) {
  MiniToml t;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty() || val.empty()) throw ConfigError("bad entry at line " + std::to_string(lineno));
    t.kv_[section.empty() ? key : section + "." + key] = val;
  }
  return t;
}

double MiniToml::get_double(const std::string& key, double fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw ConfigError("not a number: " + key + " = " + it->second);
  }
}

int MiniToml::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, static_cast<double>(fallback));
  return static_cast<int>(std::llround(v));
}

bool MiniToml::get_bool(const std::string& key, bool fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  if (it->second == "true") return true;
  if (it->second == "false") return false;
  throw ConfigError("not a boolean: " + key);
}

std::string MiniToml::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : unquote(it->second);
}

std::vector<double> MiniToml::get_double_array(const std::string& key,
                                               const std::vector<double>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_array(it->second)) out.push_back(std::stod(item));
  return out;
}

std::vector<std::string> MiniToml::get_string_array(const std::string& key,
                                                    const std::vector<std::string>& fallback) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  std::vector<std::string> out;
  for (const auto& item : split_array(it->second)) out.push_back(unquote(item));
  return out;
}

void ExperimentConfig::validate() const {
  scene.validate();
  arrays.validate();
  if (T1 < 1 || T2 < 1 || T3 < 0 || T4 < 0) throw ConfigError("pilot counts out of range");
  if (seed_hi < seed_lo) throw ConfigError("seed range is empty");
  if (Q <= K() + L()) throw ConfigError("Q must exceed K + L");
  if (P < 1) throw ConfigError("P must be >= 1");
}

ExperimentConfig desk_profile() {
  ExperimentConfig cfg;
  // desk-scale noise floor keeps all four echo blocks observable with the
  // small arrays (the full-size profile uses -100 dBm)
  cfg.scene.sigma2 = 1e-17;  // -140 dBm
  return cfg;
}

ExperimentConfig paper_profile() {
  ExperimentConfig cfg;
  cfg.profile = "paper";
  cfg.arrays = ArraySpec{160, 192, 160};
  cfg.Q = 64;
  cfg.P = 9;
  cfg.content = SceneContent{3, 4, 4, 1.0};
  cfg.scene.sigma2 = 1e-13;  // -100 dBm
  cfg.seed_hi = 49;
  return cfg;
}

void apply_toml(ExperimentConfig& cfg, const MiniToml& t) {
  auto vec2 = [&](const std::string& key, const Vec2& fb) {
    const auto arr = t.get_double_array(key, {fb.x(), fb.y()});
    if (arr.size() != 2) throw ConfigError(key + " must have two entries");
    return Vec2(arr[0], arr[1]);
  };
  auto rect = [&](const std::string& key, const Rect& fb) {
    Rect r;
    r.center = vec2(key + ".center", fb.center);
    r.width = t.get_double(key + ".width", fb.width);
    r.height = t.get_double(key + ".height", fb.height);
    return r;
  };

  cfg.scene.p_B = vec2("scene.p_B", cfg.scene.p_B);
  cfg.scene.p_I = vec2("scene.p_I", cfg.scene.p_I);
  cfg.scene.p_c = vec2("scene.p_c", cfg.scene.p_c);
  cfg.scene.theta_B = t.get_double("scene.theta_B", cfg.scene.theta_B);
  cfg.scene.theta_I = t.get_double("scene.theta_I", cfg.scene.theta_I);
  cfg.scene.soi_R = rect("scene.soi_R", cfg.scene.soi_R);
  cfg.scene.soi_Ru = rect("scene.soi_Ru", cfg.scene.soi_Ru);
  cfg.scene.lambda = t.get_double("scene.lambda", cfg.scene.lambda);
  if (t.has("scene.sigma2_dbm"))
    cfg.scene.sigma2 = std::pow(10.0, t.get_double("scene.sigma2_dbm", 0.0) / 10.0) * 1e-3;
  else
    cfg.scene.sigma2 = t.get_double("scene.sigma2", cfg.scene.sigma2);

  cfg.arrays.M = t.get_int("arrays.M", cfg.arrays.M);
  cfg.arrays.Np = t.get_int("arrays.Np", cfg.arrays.Np);
  cfg.arrays.Ns = t.get_int("arrays.Ns", cfg.arrays.Ns);

  cfg.Q = t.get_int("grids.Q", cfg.Q);
  cfg.P = t.get_int("grids.P", cfg.P);

  cfg.content.K_B = t.get_int("content.K_B", cfg.content.K_B);
  cfg.content.L_B = t.get_int("content.L_B", cfg.content.L_B);
  cfg.content.O = t.get_int("content.O", cfg.content.O);
  cfg.content.kappa = t.get_double("content.kappa", cfg.content.kappa);

  cfg.comm_pl.exp_los = t.get_double("channel.exp_los", cfg.comm_pl.exp_los);
  cfg.comm_pl.exp_nlos = t.get_double("channel.exp_nlos", cfg.comm_pl.exp_nlos);
  cfg.comm_pl.nlos_extra = t.get_double("channel.nlos_extra", cfg.comm_pl.nlos_extra);

  cfg.T1 = t.get_int("pilots.T1", cfg.T1);
  cfg.T2 = t.get_int("pilots.T2", cfg.T2);
  cfg.T3 = t.get_int("pilots.T3", cfg.T3);
  cfg.T4 = t.get_int("pilots.T4", cfg.T4);

  cfg.pt_dbm = t.get_double_array("power.pt_dbm", cfg.pt_dbm);
  cfg.sweep_pt_dbm = t.get_double("power.sweep_pt_dbm", cfg.sweep_pt_dbm);
  cfg.np_pt_dbm = t.get_double("power.np_pt_dbm", cfg.np_pt_dbm);

  cfg.seed_lo = static_cast<uint64_t>(t.get_int("mc.seed_lo", static_cast<int>(cfg.seed_lo)));
  cfg.seed_hi = static_cast<uint64_t>(t.get_int("mc.seed_hi", static_cast<int>(cfg.seed_hi)));
  cfg.schemes = t.get_string_array("mc.schemes", cfg.schemes);
  cfg.sweep_axis = t.get_string("mc.sweep_axis", cfg.sweep_axis);
  cfg.overlap_ratios = t.get_double_array("mc.overlap_ratios", cfg.overlap_ratios);
  {
    std::vector<double> np_fb(cfg.np_values.begin(), cfg.np_values.end());
    const auto vals = t.get_double_array("mc.np_values", np_fb);
    cfg.np_values.clear();
    for (double v : vals) cfg.np_values.push_back(static_cast<int>(std::llround(v)));
  }
  cfg.overlap_KB = t.get_int("mc.overlap_KB", cfg.overlap_KB);
  cfg.overlap_LB = t.get_int("mc.overlap_LB", cfg.overlap_LB);

  cfg.prior_a = t.get_double("prior.a", cfg.prior_a);
  cfg.prior_b_scale = t.get_double("prior.b", cfg.prior_b_scale);
  cfg.prior_a_bar = t.get_double("prior.a_bar", cfg.prior_a_bar);
  cfg.prior_b_bar = t.get_double("prior.b_bar", cfg.prior_b_bar);
  cfg.mrf_alpha = t.get_double("prior.alpha", cfg.mrf_alpha);
  cfg.mrf_beta = t.get_double("prior.beta", cfg.mrf_beta);
  cfg.p_T_override = t.get_double("prior.p_T", cfg.p_T_override);
  cfg.p_NL_override = t.get_double("prior.p_NL", cfg.p_NL_override);
  cfg.p_L_override = t.get_double("prior.p_L", cfg.p_L_override);

  cfg.estep.max_turbo = t.get_int("estep.max_turbo", cfg.estep.max_turbo);
  cfg.estep.turbo_tol = t.get_double("estep.turbo_tol", cfg.estep.turbo_tol);
  cfg.estep.inner_max = t.get_int("estep.inner_max", cfg.estep.inner_max);
  cfg.estep.inner_tol = t.get_double("estep.inner_tol", cfg.estep.inner_tol);
  cfg.estep.bp_sweeps = t.get_int("estep.bp_sweeps", cfg.estep.bp_sweeps);
  cfg.estep.bp_damping = t.get_double("estep.bp_damping", cfg.estep.bp_damping);

  const std::string rule = t.get_string("mstep.rule", cfg.mstep.rule == MStepRule::DDG ? "ddg" : "ga");
  if (rule == "ddg")
    cfg.mstep.rule = MStepRule::DDG;
  else if (rule == "ga")
    cfg.mstep.rule = MStepRule::GradientAscent;
  else
    throw ConfigError("mstep.rule must be ddg or ga");
  cfg.mstep.step_init_frac = t.get_double("mstep.step_init_frac", cfg.mstep.step_init_frac);
  cfg.mstep.step_floor_frac = t.get_double("mstep.step_floor_frac", cfg.mstep.step_floor_frac);
  cfg.mstep.N_out = t.get_int("mstep.N_out", cfg.mstep.N_out);
  cfg.mstep.eps_out = t.get_double("mstep.eps_out", cfg.mstep.eps_out);
  cfg.mstep.cand_threshold = t.get_double("mstep.cand_threshold", cfg.mstep.cand_threshold);

  cfg.rcg.eps_R = t.get_double("rcg.eps_R", cfg.rcg.eps_R);
  cfg.rcg.max_iter = t.get_int("rcg.max_iter", cfg.rcg.max_iter);
  cfg.rcg.armijo_c1 = t.get_double("rcg.armijo_c1", cfg.rcg.armijo_c1);
  cfg.rcg.armijo_shrink = t.get_double("rcg.armijo_shrink", cfg.rcg.armijo_shrink);
  cfg.rcg.step0 = t.get_double("rcg.step0", cfg.rcg.step0);

  cfg.sbl.max_iter = t.get_int("sbl.max_iter", cfg.sbl.max_iter);
  cfg.sbl.prune_threshold = t.get_double("sbl.prune_threshold", cfg.sbl.prune_threshold);

  cfg.out_dir = t.get_string("out.dir", cfg.out_dir);
  cfg.emit_plots = t.get_bool("out.emit_plots", cfg.emit_plots);
  cfg.threads = t.get_int("out.threads", cfg.threads);
}

ExperimentConfig load_config(const std::string& path_or_empty, const std::string& profile) {
  ExperimentConfig cfg = profile == "paper" ? paper_profile() : desk_profile();
  if (!path_or_empty.empty()) apply_toml(cfg, MiniToml::parse_file(path_or_empty));
  cfg.validate();
  return cfg;
}

std::string config_to_string(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "pB=" << cfg.scene.p_B.transpose() << ";pI=" << cfg.scene.p_I.transpose()
     << ";pc=" << cfg.scene.p_c.transpose() << ";thB=" << cfg.scene.theta_B
     << ";thI=" << cfg.scene.theta_I << ";lam=" << cfg.scene.lambda << ";s2=" << cfg.scene.sigma2
     << ";R=" << cfg.scene.soi_R.center.transpose() << "," << cfg.scene.soi_R.width << ","
     << cfg.scene.soi_R.height << ";Ru=" << cfg.scene.soi_Ru.center.transpose() << ","
     << cfg.scene.soi_Ru.width << "," << cfg.scene.soi_Ru.height << ";M=" << cfg.arrays.M
     << ";Np=" << cfg.arrays.Np << ";Ns=" << cfg.arrays.Ns << ";Q=" << cfg.Q << ";P=" << cfg.P
     << ";KB=" << cfg.content.K_B << ";LB=" << cfg.content.L_B << ";O=" << cfg.content.O
     << ";kap=" << cfg.content.kappa << ";T=" << cfg.T1 << "," << cfg.T2 << "," << cfg.T3 << ","
     << cfg.T4 << ";alpha=" << cfg.mrf_alpha << ";beta=" << cfg.mrf_beta
     << ";a=" << cfg.prior_a << ";b=" << cfg.prior_b_scale << ";abar=" << cfg.prior_a_bar
     << ";bbar=" << cfg.prior_b_bar << ";axis=" << cfg.sweep_axis << ";seeds=" << cfg.seed_lo
     << ".." << cfg.seed_hi;
  for (const auto& s : cfg.schemes) os << "," << s;
  for (double p : cfg.pt_dbm) os << ";pt=" << p;
  for (double g : cfg.overlap_ratios) os << ";go=" << g;
  for (int n : cfg.np_values) os << ";np=" << n;
  return os.str();
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_string(cfg);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace jsce
