#pragma once

#include <fstream>
#include <string>

#include "ppmreg/errors.hpp"
#include "ppmreg/geometry.hpp"

namespace ppmreg {

// One animation frame: reference cloud in blue, trained cloud in orange,
// fixed viewport so frames assemble into a stable animation.
inline void write_svg_frame(const PointCloud& reference, const PointCloud& trained,
                            const std::string& path, double view_lo = -1.6, double view_hi = 1.6,
                            int size_px = 640) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    const double span = view_hi - view_lo;
    const double scale = size_px / span;
    auto sx = [&](double x) { return (x - view_lo) * scale; };
    auto sy = [&](double y) { return (view_hi - y) * scale; };  // flip y

    std::string body;
    body += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(size_px) +
            "\" height=\"" + std::to_string(size_px) + "\">\n";
    body += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto dots = [&](const PointCloud& cloud, const char* color) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            auto p = cloud.point(i);
            const double x = p[0];
            const double y = cloud.dim() > 1 ? p[1] : 0.0;
            body += "<circle cx=\"";
            format_double(body, sx(x));
            body += "\" cy=\"";
            format_double(body, sy(y));
            body += "\" r=\"2.5\" fill=\"";
            body += color;
            body += "\" fill-opacity=\"0.75\"/>\n";
        }
    };
    dots(reference, "#1f77b4");
    dots(trained, "#ff7f0e");
    body += "</svg>\n";
    out << body;
}

} // namespace ppmreg
