#pragma once

#include <vector>

#include "jsce/rng.hpp"
#include "jsce/types.hpp"

namespace jsce {

/// Axis-aligned rectangle, center + full width/height in meters.
struct Rect {
  Vec2 center{0.0, 0.0};
  double width = 0.0;
  double height = 0.0;

  double xmin() const { return center.x() - 0.5 * width; }
  double xmax() const { return center.x() + 0.5 * width; }
  double ymin() const { return center.y() - 0.5 * height; }
  double ymax() const { return center.y() + 0.5 * height; }
  bool contains(const Vec2& p) const {
    return p.x() >= xmin() && p.x() <= xmax() && p.y() >= ymin() && p.y() <= ymax();
  }
};

enum class AngleConvention { IRS, BS };

/// Static world geometry: anchor positions, array orientations, regions of
/// interest, carrier wavelength and noise power.
struct SceneConfig {
  Vec2 p_B{-22.5, 0.4};   // BS position
  Vec2 p_I{22.5, 0.4};    // IRS far-field reference point
  Vec2 p_c{22.5, 0.35};   // IRS controller, mounted 5 cm off the panel
  double theta_B = 0.0;   // BS array orientation vs +x axis
  double theta_I = kPi;   // IRS array orientation vs +x axis
  Rect soi_R{{0.0, 25.0}, 40.0, 40.0};    // target/scatterer region
  Rect soi_Ru{{0.0, 12.0}, 15.0, 15.0};   // user region
  double lambda = 0.0107068735;           // 28 GHz carrier
  double sigma2 = 1e-13;                  // noise power in watts

  void validate() const;
};

/// Uniform 2D lattice over a rectangle, indexed column-major: q = col*ny + row.
/// ny is the per-column stride used for MRF neighbor lookup.
struct Grid {
  std::vector<Vec2> pts;
  int nx = 0;
  int ny = 0;        // grid_cols_y: points per column
  double dx = 0.0;   // spacing along x
  double dy = 0.0;   // spacing along y

  int size() const { return static_cast<int>(pts.size()); }
};

struct GridSpec {
  Grid r;  // Q points over soi_R
  Grid z;  // P points over soi_Ru
};

/// True object placement. Overlapping objects appear in both `targets` and
/// `scatterers` at identical positions (first `overlap_count` of each list).
struct GroundTruth {
  std::vector<Vec2> targets;     // K
  std::vector<Vec2> scatterers;  // L
  Vec2 user{0.0, 0.0};
  int overlap_count = 0;         // O
  std::vector<double> rcs;       // kappa_k per target, m^2

  int K() const { return static_cast<int>(targets.size()); }
  int L() const { return static_cast<int>(scatterers.size()); }
};

/// Per-grid continuous position offsets; nonzero only at occupied grids.
struct OffsetState {
  MatR dr;  // Q x 2
  MatR dz;  // P x 2

  static OffsetState zeros(int Q, int P) {
    OffsetState o;
    o.dr = MatR::Zero(Q, 2);
    o.dz = MatR::Zero(P, 2);
    return o;
  }
};

/// Grid indices of the true objects, as produced by assign_offsets.
struct IndexMap {
  std::vector<int> q_T;  // per target
  std::vector<int> q_S;  // per scatterer
  int p_u = -1;          // user z-grid
};

/// Uniform lattices over both regions. Q and P must factor into nx*ny whose
/// spacings roughly agree (square cells); otherwise a ConfigError is thrown.
GridSpec build_grids(const Rect& soi_R, const Rect& soi_Ru, int Q, int P);

/// Exact offsets p - r_q at each occupied grid, zero elsewhere. Throws
/// SceneError when two distinct objects share a nearest grid.
std::pair<OffsetState, IndexMap> assign_offsets(const GroundTruth& truth, const GridSpec& grids);

/// AoA/AoD between an anchor array and a field point.
///   IRS: wrap(atan2(dy, dx) - pi - theta);  BS: wrap(atan2(dy, dx) + theta).
double angle_to(const Vec2& anchor, double orientation, const Vec2& p, AngleConvention conv);

int nearest_grid_index(const Grid& g, const Vec2& p);

/// Content knobs for the random scene generator. Block objects occupy two
/// vertically adjacent grid cells; O individual objects are both target and
/// scatterer.
struct SceneContent {
  int K_B = 1;       // block targets (K = 2*K_B)
  int L_B = 2;       // block scatterers (L = 2*L_B)
  int O = 1;         // overlapping individual objects
  double kappa = 1.0;
};

/// Randomly places block targets/scatterers and the user so that all distinct
/// physical objects map to distinct nearest grids. Re-samples on collision,
/// up to 100 attempts.
GroundTruth generate_truth(const SceneConfig& scene, const GridSpec& grids,
                           const SceneContent& content, Rng& rng);

std::string scene_to_json(const SceneConfig& scene, const GroundTruth& truth);
void scene_from_json(const std::string& text, SceneConfig& scene, GroundTruth& truth);

}  // namespace jsce
