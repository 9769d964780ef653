#include "nellcom/svg.hpp"

#include <cmath>
#include <cstdio>

namespace nellcom {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

SvgCanvas::SvgCanvas(double width, double height) : width_(width), height_(height) {}

void SvgCanvas::comment(const std::string& text) {
  std::string safe = text;
  size_t pos = 0;
  while ((pos = safe.find("--", pos)) != std::string::npos) safe.replace(pos, 2, "==");
  body_ += "<!--\n" + safe + "\n-->\n";
}

void SvgCanvas::line(double x1, double y1, double x2, double y2, const std::string& stroke,
                     double width, const std::string& dash) {
  body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" +
           num(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"";
  if (!dash.empty()) body_ += " stroke-dasharray=\"" + dash + "\"";
  body_ += "/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& stroke, double width) {
  if (pts.size() < 2) return;
  body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) +
           "\" points=\"";
  for (const auto& [x, y] : pts) body_ += num(x) + "," + num(y) + " ";
  body_ += "\"/>\n";
}

void SvgCanvas::polygon(const std::vector<std::pair<double, double>>& pts,
                        const std::string& fill, double opacity) {
  if (pts.size() < 3) return;
  body_ += "<polygon fill=\"" + fill + "\" fill-opacity=\"" + num(opacity) +
           "\" stroke=\"none\" points=\"";
  for (const auto& [x, y] : pts) body_ += num(x) + "," + num(y) + " ";
  body_ += "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& fill,
                       const std::string& stroke, double stroke_width) {
  body_ += "<circle cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"" + num(r) + "\" fill=\"" +
           fill + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(stroke_width) + "\"/>\n";
}

void SvgCanvas::diamond(double cx, double cy, double r, const std::string& fill) {
  body_ += "<path d=\"M " + num(cx) + " " + num(cy - r) + " L " + num(cx + r) + " " + num(cy) +
           " L " + num(cx) + " " + num(cy + r) + " L " + num(cx - r) + " " + num(cy) +
           " Z\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::rect(double x, double y, double w, double h, const std::string& fill,
                     const std::string& stroke) {
  body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
           num(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
}

void SvgCanvas::text(double x, double y, const std::string& s, double size,
                     const std::string& anchor, const std::string& fill) {
  body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + num(size) +
           "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\" fill=\"" + fill +
           "\">" + escape(s) + "</text>\n";
}

std::string SvgCanvas::finish() const {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" "
         "width=\"" +
         num(width_) + "\" height=\"" + num(height_) + "\" viewBox=\"0 0 " + num(width_) + " " +
         num(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body_ +
         "</svg>\n";
}

std::string format_tick(double v) {
  char buf[32];
  if (std::fabs(v - std::round(v)) < 1e-9)
    std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(std::llround(v)));
  else
    std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void draw_axes(SvgCanvas& svg, const PlotArea& a, const std::string& x_label,
               const std::string& y_label, int x_ticks, int y_ticks) {
  svg.line(a.px, a.py + a.ph, a.px + a.pw, a.py + a.ph, "#222222", 1.0);
  svg.line(a.px, a.py, a.px, a.py + a.ph, "#222222", 1.0);
  for (int i = 0; i <= x_ticks; ++i) {
    const double v = a.x0 + (a.x1 - a.x0) * i / x_ticks;
    const double x = a.x(v);
    svg.line(x, a.py + a.ph, x, a.py + a.ph + 4, "#222222", 1.0);
    svg.text(x, a.py + a.ph + 16, format_tick(v), 10, "middle");
  }
  for (int i = 0; i <= y_ticks; ++i) {
    const double v = a.y0 + (a.y1 - a.y0) * i / y_ticks;
    const double y = a.y(v);
    svg.line(a.px - 4, y, a.px, y, "#222222", 1.0);
    svg.text(a.px - 7, y + 3, format_tick(v), 10, "end");
  }
  svg.text(a.px + a.pw / 2, a.py + a.ph + 32, x_label, 11, "middle");
  svg.text(a.px - 34, a.py - 8, y_label, 11, "start");
}

}  // namespace nellcom
