#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace ctaug::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::array<uint8_t, 3> color{0, 0, 0};
};

// Minimal PNG line plot: axes box, ticks, legend. Keeps results inspectable
// without a plotting stack; the CSVs next to it carry the raw numbers.
void render_line_plot(const std::filesystem::path& path,
                      const std::string& title,
                      const std::vector<Series>& series, int width = 720,
                      int height = 480);

std::array<uint8_t, 3> palette_color(size_t index);

}  // namespace ctaug::plot
