#pragma once

#include <string>
#include <vector>

namespace nellcom {

// Minimal standalone-SVG writer; enough for line charts, stacked areas and
// scatter plots without any plotting dependency.
class SvgCanvas {
 public:
  SvgCanvas(double width, double height);

  void comment(const std::string& text);
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.0, const std::string& dash = "");
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.5);
  void polygon(const std::vector<std::pair<double, double>>& pts, const std::string& fill,
               double opacity = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill,
              const std::string& stroke = "none", double stroke_width = 1.0);
  void diamond(double cx, double cy, double r, const std::string& fill);
  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "none");
  void text(double x, double y, const std::string& s, double size = 11.0,
            const std::string& anchor = "start", const std::string& fill = "#222222");

  std::string finish() const;

  double width() const { return width_; }
  double height() const { return height_; }

 private:
  double width_, height_;
  std::string body_;
};

// Affine map from data space onto a pixel rectangle (y axis flipped).
struct PlotArea {
  double px, py, pw, ph;          // pixel rect (top-left origin)
  double x0, x1, y0, y1;          // data ranges

  double x(double v) const { return px + (v - x0) / (x1 - x0) * pw; }
  double y(double v) const { return py + ph - (v - y0) / (y1 - y0) * ph; }
};

// Frame, tick marks and numeric labels around a plot area.
void draw_axes(SvgCanvas& svg, const PlotArea& area, const std::string& x_label,
               const std::string& y_label, int x_ticks = 5, int y_ticks = 5);

std::string format_tick(double v);

}  // namespace nellcom
