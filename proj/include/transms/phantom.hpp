#pragma once

#include <vector>

#include "transms/scanner.hpp"

namespace transms {

/// Axis-aligned rectangle in mm measured from the FOV corner.
struct Rect {
  double x0_mm = 0.0, y0_mm = 0.0, x1_mm = 0.0, y1_mm = 0.0;
};

struct PhantomGeometry {
  Grid grid{32, 32};
  double fov_x_mm = 32.0;
  double fov_y_mm = 32.0;
  /// Sub-pixel samples per axis for the partial-volume fraction.
  int supersampling = 16;
};

enum class PhantomKind { kRectangles, kTubes, kStenosis };

struct PhantomSpec {
  PhantomKind kind = PhantomKind::kTubes;
  std::vector<Rect> rects;                  // kRectangles
  std::vector<double> tube_widths_mm{6.0, 4.0};  // kTubes, left to right
  double length_mm = 22.0;                  // tubes run along y, centred
  double spacing_mm = 10.0;                 // edge-to-edge gap between tubes
  double width_mm = 6.0;                    // kStenosis vessel width
  double stenosis_width_mm = 2.0;
  double stenosis_length_mm = 5.0;
};

/// Union of rectangles with partial-volume fractions in [0, 1]. Throws
/// GeometryError if any rectangle leaves the FOV.
Phantom rasterize(const std::vector<Rect>& rects, const PhantomGeometry& geometry, std::string description);

/// Rectangles making up a phantom, centred in the FOV.
std::vector<Rect> phantom_rects(const PhantomSpec& spec, const PhantomGeometry& geometry);

Phantom make_phantom(const PhantomSpec& spec, const PhantomGeometry& geometry);

}  // namespace transms
