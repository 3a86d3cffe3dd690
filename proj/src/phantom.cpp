#include "transms/phantom.hpp"

#include <numeric>
#include <sstream>

namespace transms {

Phantom rasterize(const std::vector<Rect>& rects, const PhantomGeometry& g, std::string description) {
  if (g.grid.width < 1 || g.grid.height < 1 || !(g.fov_x_mm > 0.0 && g.fov_y_mm > 0.0) || g.supersampling < 1)
    throw Error("phantom geometry is degenerate");
  for (const Rect& r : rects) {
    if (!(r.x1_mm > r.x0_mm && r.y1_mm > r.y0_mm)) throw GeometryError("phantom rectangle is empty");
    if (r.x0_mm < 0.0 || r.y0_mm < 0.0 || r.x1_mm > g.fov_x_mm || r.y1_mm > g.fov_y_mm)
      throw GeometryError("phantom geometry extends outside the FOV");
  }
  const double dx = g.fov_x_mm / double(g.grid.width), dy = g.fov_y_mm / double(g.grid.height);
  const int ss = g.supersampling;
  Phantom p{g.grid, VectorXd::Zero(g.grid.size()), std::move(description)};
  for (Index y = 0; y < g.grid.height; ++y)
    for (Index x = 0; x < g.grid.width; ++x) {
      int inside = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double px = (double(x) + (sx + 0.5) / ss) * dx, py = (double(y) + (sy + 0.5) / ss) * dy;
          for (const Rect& r : rects)
            if (px >= r.x0_mm && px < r.x1_mm && py >= r.y0_mm && py < r.y1_mm) {
              ++inside;
              break;
            }
        }
      p.concentration[y * g.grid.width + x] = double(inside) / double(ss * ss);
    }
  return p;
}

std::vector<Rect> phantom_rects(const PhantomSpec& spec, const PhantomGeometry& g) {
  const double cx = 0.5 * g.fov_x_mm, cy = 0.5 * g.fov_y_mm;
  switch (spec.kind) {
    case PhantomKind::kRectangles:
      return spec.rects;
    case PhantomKind::kTubes: {
      if (spec.tube_widths_mm.empty()) throw GeometryError("tube phantom needs at least one tube");
      const double total = std::accumulate(spec.tube_widths_mm.begin(), spec.tube_widths_mm.end(), 0.0) +
                           spec.spacing_mm * double(spec.tube_widths_mm.size() - 1);
      std::vector<Rect> rects;
      double x = cx - 0.5 * total;
      for (double w : spec.tube_widths_mm) {
        rects.push_back({x, cy - 0.5 * spec.length_mm, x + w, cy + 0.5 * spec.length_mm});
        x += w + spec.spacing_mm;
      }
      return rects;
    }
    case PhantomKind::kStenosis: {
      const double half = 0.5 * spec.length_mm, narrow = 0.5 * spec.stenosis_length_mm;
      if (spec.stenosis_length_mm >= spec.length_mm || spec.stenosis_width_mm > spec.width_mm)
        throw GeometryError("stenosis must be shorter and narrower than the vessel");
      return {{cx - 0.5 * spec.width_mm, cy - half, cx + 0.5 * spec.width_mm, cy - narrow},
              {cx - 0.5 * spec.stenosis_width_mm, cy - narrow, cx + 0.5 * spec.stenosis_width_mm, cy + narrow},
              {cx - 0.5 * spec.width_mm, cy + narrow, cx + 0.5 * spec.width_mm, cy + half}};
    }
  }
  throw Error("unknown phantom kind");
}

Phantom make_phantom(const PhantomSpec& spec, const PhantomGeometry& g) {
  std::ostringstream d;
  switch (spec.kind) {
    case PhantomKind::kRectangles: d << spec.rects.size() << " rectangles"; break;
    case PhantomKind::kTubes:
      d << spec.tube_widths_mm.size() << " tubes, length " << spec.length_mm << " mm, gap " << spec.spacing_mm << " mm";
      break;
    case PhantomKind::kStenosis:
      d << "vessel " << spec.width_mm << " mm with " << spec.stenosis_length_mm << " mm stenosis of width "
        << spec.stenosis_width_mm << " mm";
      break;
  }
  return rasterize(phantom_rects(spec, g), g, d.str());
}

}  // namespace transms
