#pragma once

#include <iosfwd>
#include <vector>

#include "simloc/geometry.hpp"
#include "simloc/types.hpp"

namespace simloc {

struct LocalizerConfig {
  int coarse_grid = 64;        // points per axis over the region bounding box
  int refine_iters = 6;
  double refine_shrink = 0.5;  // grid spacing factor per refinement round

  void validate() const;
};

struct LocalizationResult {
  Point2 position;
  double score = 0.0;  // |a^H h|^2 / (K ||h||^2)
};

/// |a(p)^H h|^2 / (K ||h||^2).
double match_score(const ArrayGeometry& geometry, const CVec& h_hat, const Point2& p);

/// Concentrated maximum-likelihood position over the region: coarse grid
/// search, shrinking local grids around the incumbent, then a damped Newton
/// polish of the correlation inside the region.
LocalizationResult localize(const CVec& h_hat, const ArrayGeometry& geometry,
                            const UncertaintyRegion& region, const LocalizerConfig& cfg = {});

/// In-region grid points of the coarse search.
std::vector<Point2> coarse_grid(const UncertaintyRegion& region, int points_per_axis);

struct LocalizationRecord {
  Point2 truth;
  Point2 estimate;
  double error_m = 0.0;
  double score = 0.0;
};

/// CSV with header true_x,true_y,est_x,est_y,error_m,score.
void write_localization_csv(std::ostream& out, const std::vector<LocalizationRecord>& records);

}  // namespace simloc
