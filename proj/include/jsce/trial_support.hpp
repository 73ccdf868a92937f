#pragma once

#include <vector>

#include "jsce/estep.hpp"
#include "jsce/measurement.hpp"

namespace jsce {

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

struct AngularSpan {
  double lo = 0.0;
  double hi = 0.0;
};

/// Angular interval covering a rectangle from an anchor array, padded by
/// pad_frac of its width.
AngularSpan angular_span(const Rect& r, const Vec2& anchor, double orientation,
                         AngleConvention conv, double pad_frac = 0.02);

/// Phase-I sensing schedule: codebook beams with the known controller->
/// element phases pre-compensated so the effective illumination keeps the
/// beam shapes (entries stay unit modulus).
MatC compensate_sensing(const MatC& codebook, const VecC& h_CI);

/// Phase-I CE schedule: codebook beams steered through the known IRS->BS
/// link (a_IB is the IRS-side steering toward the BS).
MatC compensate_comm(const MatC& codebook, const VecC& a_IB);

Observation scale_observation(const Observation& obs, double factor);

/// Adapts a point estimate (OMP/SBL) to the PosteriorState interface: block
/// means from x, optional support covariance scattered per block, support
/// probabilities from the selected set ranked by per-block-normalized energy.
PosteriorState posterior_from_point(const VecC& x, const std::vector<int>& support,
                                    const MatC& Sigma_support, const MeasurementModel& m);

struct Detections {
  std::vector<Vec2> targets, scatterers;
  Vec2 user{0.0, 0.0};
};

/// Exactly K targets, L scatterers and the user, ranked by support
/// probability then per-block-normalized energy; positions are grid +
/// refined offset.
Detections detect_positions(const PosteriorState& st, const GridSpec& grids,
                            const OffsetState& off, int K, int L);

}  // namespace jsce
