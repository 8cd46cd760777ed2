#include "poltrans/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace poltrans {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void check_planar(const std::vector<Vector>& pts) {
  for (const auto& p : pts) {
    if (p.size() < 2) throw std::invalid_argument("SVG points need two coordinates");
  }
}

std::vector<Vector> band_outline(const std::vector<Vector>& c, const std::vector<double>& hw) {
  const std::size_t n = c.size();
  std::vector<Vector> upper, lower;
  for (std::size_t i = 0; i < n; ++i) {
    const Vector& a = c[i > 0 ? i - 1 : i];
    const Vector& b = c[i + 1 < n ? i + 1 : i];
    Vector t = (b - a).head(2);
    const double len = t.norm();
    Vector nrm = Vector::Zero(2);
    if (len > 0.0) {
      nrm(0) = -t(1) / len;
      nrm(1) = t(0) / len;
    }
    upper.push_back(c[i].head(2) + hw[i] * nrm);
    lower.push_back(c[i].head(2) - hw[i] * nrm);
  }
  std::reverse(lower.begin(), lower.end());
  upper.insert(upper.end(), lower.begin(), lower.end());
  return upper;
}

}  // namespace

void SvgPlot::add_polyline(std::vector<Vector> points, std::string color, std::string label, double width,
                           bool dashed) {
  check_planar(points);
  items_.push_back({Kind::polyline, std::move(points), {}, std::move(color), std::move(label), width, dashed});
}

void SvgPlot::add_markers(std::vector<Vector> points, std::string color, std::string label, double radius) {
  check_planar(points);
  items_.push_back({Kind::markers, std::move(points), {}, std::move(color), std::move(label), radius, false});
}

void SvgPlot::add_band(std::vector<Vector> center, std::vector<double> half_width, std::string color,
                       std::string label, double opacity) {
  check_planar(center);
  if (center.size() != half_width.size()) throw std::invalid_argument("band widths do not match the curve");
  items_.push_back(
      {Kind::band, std::move(center), std::move(half_width), std::move(color), std::move(label), opacity, false});
}

std::string SvgPlot::render(int width, int height) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  double x0 = inf, y0 = inf, x1 = -inf, y1 = -inf;
  std::vector<std::vector<Vector>> shapes;
  for (const auto& it : items_) {
    shapes.push_back(it.kind == Kind::band ? band_outline(it.points, it.half_width) : it.points);
    for (const auto& p : shapes.back()) {
      x0 = std::min(x0, p(0));
      x1 = std::max(x1, p(0));
      y0 = std::min(y0, p(1));
      y1 = std::max(y1, p(1));
    }
  }
  if (!std::isfinite(x0)) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  const double margin = 30.0;
  const double top = title_.empty() ? margin : margin + 20.0;
  const double span = std::max({x1 - x0, y1 - y0, 1e-9});
  const double scale = std::min((width - 2 * margin) / std::max(x1 - x0, span * 1e-3),
                                (height - margin - top) / std::max(y1 - y0, span * 1e-3));
  auto px = [&](const Vector& p) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(2) << margin + (p(0) - x0) * scale << ","
      << height - margin - (p(1) - y0) * scale;
    return s.str();
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title_.empty()) {
    out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"14\">" << escape(title_) << "</text>\n";
  }
  for (std::size_t k = 0; k < items_.size(); ++k) {
    const auto& it = items_[k];
    const auto& pts = shapes[k];
    switch (it.kind) {
      case Kind::band:
      case Kind::polyline: {
        const bool band = it.kind == Kind::band;
        out << (band ? "<polygon" : "<polyline") << " points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) out << (i ? " " : "") << px(pts[i]);
        if (band) {
          out << "\" fill=\"" << it.color << "\" fill-opacity=\"" << it.size << "\" stroke=\"none\"/>\n";
        } else {
          out << "\" fill=\"none\" stroke=\"" << it.color << "\" stroke-width=\"" << it.size << "\""
              << (it.dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n";
        }
        break;
      }
      case Kind::markers:
        for (const auto& p : pts) {
          const auto xy = px(p);
          const auto comma = xy.find(',');
          out << "<circle cx=\"" << xy.substr(0, comma) << "\" cy=\"" << xy.substr(comma + 1) << "\" r=\""
              << it.size << "\" fill=\"" << it.color << "\"/>\n";
        }
        break;
    }
  }
  int row = 0;
  for (const auto& it : items_) {
    if (it.label.empty()) continue;
    const int y = static_cast<int>(top) + 14 * row++;
    out << "<rect x=\"" << width - 150 << "\" y=\"" << y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << it.color
        << "\"/>\n";
    out << "<text x=\"" << width - 135 << "\" y=\"" << y + 1
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(it.label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace poltrans
