#include "jsce/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "json.hpp"

namespace jsce {

void SceneConfig::validate() const {
  if (lambda <= 0.0) throw ConfigError("carrier wavelength must be positive");
  if (sigma2 <= 0.0) throw ConfigError("noise power must be positive");
  if (soi_R.width <= 0.0 || soi_R.height <= 0.0 || soi_Ru.width <= 0.0 || soi_Ru.height <= 0.0)
    throw ConfigError("SOI rectangles must have positive extent");
  if (soi_Ru.ymin() > soi_R.ymax())
    throw ConfigError("soi_Ru must be contained in or below soi_R");
}

namespace {

Grid lattice_for(const Rect& rect, int n, const char* name) {
  if (n < 1) throw ConfigError(std::string(name) + ": grid count must be >= 1");
  // choose the factorization nx*ny = n whose cell aspect is closest to square
  int best_nx = -1, best_ny = -1;
  double best_mismatch = std::numeric_limits<double>::infinity();
  for (int nx = 1; nx <= n; ++nx) {
    if (n % nx != 0) continue;
    const int ny = n / nx;
    const double dx = rect.width / nx, dy = rect.height / ny;
    const double mismatch = std::abs(std::log(dx / dy));
    if (mismatch < best_mismatch) {
      best_mismatch = mismatch;
      best_nx = nx;
      best_ny = ny;
    }
  }
  // reject factorizations whose cells are more than 2:1 off-square
  if (best_nx < 0 || best_mismatch > std::log(2.0) + 1e-12)
    throw ConfigError(std::string(name) + ": grid count " + std::to_string(n) +
                      " does not factor to match the SOI aspect");
  Grid g;
  g.nx = best_nx;
  g.ny = best_ny;
  g.dx = rect.width / best_nx;
  g.dy = rect.height / best_ny;
  g.pts.reserve(n);
  for (int ix = 0; ix < g.nx; ++ix)
    for (int iy = 0; iy < g.ny; ++iy)
      g.pts.emplace_back(rect.xmin() + (ix + 0.5) * g.dx, rect.ymin() + (iy + 0.5) * g.dy);
  return g;
}

}  // namespace

GridSpec build_grids(const Rect& soi_R, const Rect& soi_Ru, int Q, int P) {
  GridSpec grids;
  grids.r = lattice_for(soi_R, Q, "Q");
  grids.z = lattice_for(soi_Ru, P, "P");
  return grids;
}

int nearest_grid_index(const Grid& g, const Vec2& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int q = 0; q < g.size(); ++q) {
    const double d = (p - g.pts[q]).squaredNorm();
    // ties break toward the lower index
    if (d < best_d - 1e-15) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

std::pair<OffsetState, IndexMap> assign_offsets(const GroundTruth& truth, const GridSpec& grids) {
  OffsetState off = OffsetState::zeros(grids.r.size(), grids.z.size());
  IndexMap map;

  std::set<int> used;
  auto place = [&](const Vec2& p, bool is_overlap_twin) {
    const int q = nearest_grid_index(grids.r, p);
    if (!is_overlap_twin && used.count(q))
      throw SceneError("two objects share nearest grid " + std::to_string(q));
    used.insert(q);
    off.dr.row(q) = (p - grids.r.pts[q]).transpose();
    return q;
  };

  for (int k = 0; k < truth.K(); ++k) map.q_T.push_back(place(truth.targets[k], false));
  for (int l = 0; l < truth.L(); ++l) {
    // the first overlap_count scatterers are the same physical objects as the
    // first overlap_count targets and legitimately share their grid
    const bool twin = l < truth.overlap_count;
    if (twin && (truth.scatterers[l] - truth.targets[l]).norm() > 1e-12)
      throw SceneError("overlap twin positions disagree");
    map.q_S.push_back(place(truth.scatterers[l], twin));
  }

  map.p_u = nearest_grid_index(grids.z, truth.user);
  off.dz.row(map.p_u) = (truth.user - grids.z.pts[map.p_u]).transpose();
  return {off, map};
}

double angle_to(const Vec2& anchor, double orientation, const Vec2& p, AngleConvention conv) {
  const Vec2 d = p - anchor;
  if (d.norm() < 1e-12) throw DomainError("angle_to: coincident points");
  const double base = std::atan2(d.y(), d.x());
  return conv == AngleConvention::IRS ? wrap_angle(base - kPi - orientation)
                                      : wrap_angle(base + orientation);
}

namespace {

// uniform position inside cell q of grid g (half-spacing box around the center)
Vec2 jitter_in_cell(const Grid& g, int q, Rng& rng) {
  return g.pts[q] + Vec2(rng.uniform(-0.5, 0.5) * g.dx, rng.uniform(-0.5, 0.5) * g.dy);
}

struct BlockCells {
  int lo = -1;  // lower cell index (column-major: lo+1 is the cell above)
  int hi = -1;
};

// vertical 2-cell block with base row in [0, ny-1-span)
BlockCells sample_block(const Grid& g, Rng& rng, int span = 2) {
  const int col = static_cast<int>(rng.uniform_int(g.nx));
  const int row = static_cast<int>(rng.uniform_int(g.ny - span + 1));
  return {col * g.ny + row, col * g.ny + row + span - 1};
}

}  // namespace

GroundTruth generate_truth(const SceneConfig& scene, const GridSpec& grids,
                           const SceneContent& content, Rng& rng) {
  const int K = 2 * content.K_B, L = 2 * content.L_B;
  if (content.O < 0 || content.O > std::min(K, L))
    throw ConfigError("overlap count O must satisfy 0 <= O <= min(K, L)");
  if (grids.r.ny < 3 && (content.O % 2) != 0)
    throw ConfigError("odd O needs at least 3 grid rows");

  for (int attempt = 0; attempt < 100; ++attempt) {
    std::set<int> used;
    auto claim = [&](int cell) {
      if (used.count(cell)) return false;
      used.insert(cell);
      return true;
    };

    // overlap structure: O/2 fully shared blocks, plus one half-shared pair if O is odd
    const int full = content.O / 2;
    const bool half = (content.O % 2) != 0;

    std::vector<int> target_cells, scatter_cells;
    std::vector<int> shared_t, shared_s;  // indices into the cell lists, paired
    bool ok = true;

    for (int b = 0; b < full && ok; ++b) {
      const BlockCells bc = sample_block(grids.r, rng);
      ok = claim(bc.lo) && claim(bc.hi);
      if (!ok) break;
      shared_t.push_back(static_cast<int>(target_cells.size()));
      shared_s.push_back(static_cast<int>(scatter_cells.size()));
      target_cells.push_back(bc.lo);
      target_cells.push_back(bc.hi);
      scatter_cells.push_back(bc.lo);
      scatter_cells.push_back(bc.hi);
      shared_t.push_back(static_cast<int>(target_cells.size()) - 1);
      shared_s.push_back(static_cast<int>(scatter_cells.size()) - 1);
    }
    if (ok && half) {
      // target block rows (r, r+1), scatterer block rows (r+1, r+2): one shared cell
      const BlockCells bc = sample_block(grids.r, rng, 3);
      ok = claim(bc.lo) && claim(bc.lo + 1) && claim(bc.hi);
      if (ok) {
        shared_t.push_back(static_cast<int>(target_cells.size()) + 1);
        shared_s.push_back(static_cast<int>(scatter_cells.size()));
        target_cells.push_back(bc.lo);
        target_cells.push_back(bc.lo + 1);
        scatter_cells.push_back(bc.lo + 1);
        scatter_cells.push_back(bc.hi);
      }
    }
    const int placed_tb = full + (half ? 1 : 0);
    for (int b = placed_tb; b < content.K_B && ok; ++b) {
      const BlockCells bc = sample_block(grids.r, rng);
      ok = claim(bc.lo) && claim(bc.hi);
      if (ok) {
        target_cells.push_back(bc.lo);
        target_cells.push_back(bc.hi);
      }
    }
    for (int b = placed_tb; b < content.L_B && ok; ++b) {
      const BlockCells bc = sample_block(grids.r, rng);
      ok = claim(bc.lo) && claim(bc.hi);
      if (ok) {
        scatter_cells.push_back(bc.lo);
        scatter_cells.push_back(bc.hi);
      }
    }
    if (!ok) continue;

    // materialize positions; shared cells get one physical position
    GroundTruth truth;
    truth.overlap_count = content.O;
    std::vector<Vec2> tpos(target_cells.size()), spos(scatter_cells.size());
    for (size_t i = 0; i < target_cells.size(); ++i)
      tpos[i] = jitter_in_cell(grids.r, target_cells[i], rng);
    for (size_t i = 0; i < scatter_cells.size(); ++i)
      spos[i] = jitter_in_cell(grids.r, scatter_cells[i], rng);
    for (size_t i = 0; i < shared_t.size(); ++i) spos[shared_s[i]] = tpos[shared_t[i]];

    // overlapping objects first in both lists (assign_offsets relies on it)
    truth.targets.reserve(K);
    truth.scatterers.reserve(L);
    for (size_t i = 0; i < shared_t.size(); ++i) truth.targets.push_back(tpos[shared_t[i]]);
    for (size_t i = 0; i < tpos.size(); ++i)
      if (std::find(shared_t.begin(), shared_t.end(), static_cast<int>(i)) == shared_t.end())
        truth.targets.push_back(tpos[i]);
    for (size_t i = 0; i < shared_s.size(); ++i) truth.scatterers.push_back(spos[shared_s[i]]);
    for (size_t i = 0; i < spos.size(); ++i)
      if (std::find(shared_s.begin(), shared_s.end(), static_cast<int>(i)) == shared_s.end())
        truth.scatterers.push_back(spos[i]);
    truth.rcs.assign(K, content.kappa);

    truth.user = Vec2(rng.uniform(scene.soi_Ru.xmin(), scene.soi_Ru.xmax()),
                      rng.uniform(scene.soi_Ru.ymin(), scene.soi_Ru.ymax()));

    try {
      assign_offsets(truth, grids);
    } catch (const SceneError&) {
      continue;
    }
    return truth;
  }
  throw SceneError("could not place objects without grid collisions in 100 attempts");
}

std::string scene_to_json(const SceneConfig& scene, const GroundTruth& truth) {
  nlohmann::json j;
  auto vec = [](const Vec2& v) { return std::vector<double>{v.x(), v.y()}; };
  auto rect = [&](const Rect& r) {
    return nlohmann::json{{"center", vec(r.center)}, {"width", r.width}, {"height", r.height}};
  };
  j["scene"] = {{"p_B", vec(scene.p_B)},       {"p_I", vec(scene.p_I)},
                {"p_c", vec(scene.p_c)},       {"theta_B", scene.theta_B},
                {"theta_I", scene.theta_I},    {"soi_R", rect(scene.soi_R)},
                {"soi_Ru", rect(scene.soi_Ru)},{"lambda", scene.lambda},
                {"sigma2", scene.sigma2}};
  nlohmann::json jt = nlohmann::json::array(), js = nlohmann::json::array();
  for (const auto& p : truth.targets) jt.push_back(vec(p));
  for (const auto& p : truth.scatterers) js.push_back(vec(p));
  j["truth"] = {{"targets", jt},
                {"scatterers", js},
                {"user", vec(truth.user)},
                {"overlap_count", truth.overlap_count},
                {"rcs", truth.rcs}};
  return j.dump(2);
}

void scene_from_json(const std::string& text, SceneConfig& scene, GroundTruth& truth) {
  const auto j = nlohmann::json::parse(text);
  auto vec = [](const nlohmann::json& v) { return Vec2(v.at(0).get<double>(), v.at(1).get<double>()); };
  auto rect = [&](const nlohmann::json& r) {
    return Rect{vec(r.at("center")), r.at("width").get<double>(), r.at("height").get<double>()};
  };
  const auto& s = j.at("scene");
  scene.p_B = vec(s.at("p_B"));
  scene.p_I = vec(s.at("p_I"));
  scene.p_c = vec(s.at("p_c"));
  scene.theta_B = s.at("theta_B").get<double>();
  scene.theta_I = s.at("theta_I").get<double>();
  scene.soi_R = rect(s.at("soi_R"));
  scene.soi_Ru = rect(s.at("soi_Ru"));
  scene.lambda = s.at("lambda").get<double>();
  scene.sigma2 = s.at("sigma2").get<double>();
  const auto& t = j.at("truth");
  truth.targets.clear();
  truth.scatterers.clear();
  for (const auto& p : t.at("targets")) truth.targets.push_back(vec(p));
  for (const auto& p : t.at("scatterers")) truth.scatterers.push_back(vec(p));
  truth.user = vec(t.at("user"));
  truth.overlap_count = t.at("overlap_count").get<int>();
  truth.rcs = t.at("rcs").get<std::vector<double>>();
}

}  // namespace jsce
