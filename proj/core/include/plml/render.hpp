#pragma once

#include <cstddef>
#include <string>

namespace plml {

// What to draw from a sweep CSV.  auto_detect reads the header: discrete
// sweeps render as a heatmap of the diff column, sde sweeps as rate curves.
enum class RenderStyle { auto_detect, diff, scaled_diff, curves };

struct RenderInfo {
  std::string kind;  // heatmap | curves
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t cell_px = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

// Renders a sweep CSV to a PNG or SVG image (picked by extension).
// Heatmaps use a diverging palette centered at zero, blue where the
// momentum rate wins, red where it loses; cells without a certificate are
// gray and cells with divergent plain SGD are hatched.  Malformed input
// throws before any file is written, naming the offending line.
RenderInfo render_file(const std::string& csv_path,
                       const std::string& image_path,
                       RenderStyle style = RenderStyle::auto_detect);

}  // namespace plml
