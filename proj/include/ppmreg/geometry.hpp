#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ppmreg/errors.hpp"
#include "ppmreg/rng.hpp"

namespace ppmreg {

// Ordered list of points in R^n, flat row-major storage. Immutable in
// spirit: the optimizer builds updated clouds rather than mutating shared
// ones, so clouds are safe to read from many threads.
class PointCloud {
public:
    PointCloud() = default;

    PointCloud(std::vector<double> coords, std::size_t dim) : coords_(std::move(coords)), dim_(dim) {
        if (dim_ == 0) throw ConfigError("point cloud dimension must be >= 1");
        if (coords_.size() % dim_ != 0)
            throw ConfigError("coordinate count is not a multiple of the dimension");
        for (double c : coords_)
            if (!std::isfinite(c)) throw ConfigError("point cloud contains non-finite coordinates");
    }

    static PointCloud from_points(const std::vector<std::vector<double>>& pts) {
        if (pts.empty()) throw ConfigError("empty point list");
        const std::size_t dim = pts.front().size();
        std::vector<double> flat;
        flat.reserve(pts.size() * dim);
        for (const auto& p : pts) {
            if (p.size() != dim) throw ConfigError("points have inconsistent dimensions");
            flat.insert(flat.end(), p.begin(), p.end());
        }
        return PointCloud(std::move(flat), dim);
    }

    std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    bool empty() const { return coords_.empty(); }

    std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dim_, dim_}; }
    std::span<const double> flat() const { return coords_; }
    std::vector<double>& mutable_flat() { return coords_; }

    double distance(std::size_t i, std::size_t j) const {
        const double* a = coords_.data() + i * dim_;
        const double* b = coords_.data() + j * dim_;
        double s = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) {
            const double diff = a[d] - b[d];
            s += diff * diff;
        }
        return std::sqrt(s);
    }

private:
    std::vector<double> coords_;
    std::size_t dim_ = 0;
};

inline std::vector<double> pairwise_distances(const PointCloud& cloud) {
    if (cloud.empty()) throw ContractViolation("pairwise_distances: empty cloud");
    const std::size_t n = cloud.size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = cloud.distance(i, j);
            m[i * n + j] = d;
            m[j * n + i] = d;
        }
    return m;
}

inline std::vector<double> centroid(const PointCloud& cloud) {
    if (cloud.empty()) throw ContractViolation("centroid: empty cloud");
    std::vector<double> c(cloud.dim(), 0.0);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        auto p = cloud.point(i);
        for (std::size_t d = 0; d < cloud.dim(); ++d) c[d] += p[d];
    }
    for (double& v : c) v /= static_cast<double>(cloud.size());
    return c;
}

inline double diameter(const PointCloud& cloud) {
    double best = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (std::size_t j = i + 1; j < cloud.size(); ++j)
            best = std::max(best, cloud.distance(i, j));
    return best;
}

enum class ShapeKind { circle, two_circles, gaussian_blob, from_file };

// Generator parameters for the experiment shapes. Circles default to
// uniformly random angles (reference shapes are themselves samples);
// evenly_spaced exists for deterministic tests.
struct ShapeSpec {
    ShapeKind kind = ShapeKind::circle;
    std::size_t count = 1;
    double radius = 1.0;
    std::vector<double> center = {0.0, 0.0};
    double separation = 1.0;  // two_circles: distance between the centers
    double stddev = 0.3;
    bool evenly_spaced = false;
    std::string path;  // from_file

    void validate() const {
        if (count < 1) throw ConfigError("shape count must be >= 1");
        switch (kind) {
            case ShapeKind::circle:
            case ShapeKind::two_circles:
                if (radius <= 0.0) throw ConfigError("circle radius must be positive");
                break;
            case ShapeKind::gaussian_blob:
                if (stddev <= 0.0) throw ConfigError("gaussian stddev must be positive");
                break;
            case ShapeKind::from_file:
                if (path.empty()) throw ConfigError("from_file shape needs a path");
                break;
        }
    }
};

PointCloud read_cloud_csv(const std::string& path, bool expect_header = false);

inline PointCloud generate_shape(const ShapeSpec& spec, RngStream& rng) {
    spec.validate();
    constexpr double two_pi = 2.0 * 3.14159265358979323846;
    std::vector<double> flat;

    auto circle_points = [&](double cx, double cy, std::size_t count, std::size_t index_base,
                             std::size_t total) {
        for (std::size_t i = 0; i < count; ++i) {
            const double angle = spec.evenly_spaced
                                     ? two_pi * static_cast<double>(index_base + i) / static_cast<double>(total)
                                     : two_pi * rng.next_unit();
            flat.push_back(cx + spec.radius * std::cos(angle));
            flat.push_back(cy + spec.radius * std::sin(angle));
        }
    };

    switch (spec.kind) {
        case ShapeKind::circle: {
            const double cx = spec.center.size() > 0 ? spec.center[0] : 0.0;
            const double cy = spec.center.size() > 1 ? spec.center[1] : 0.0;
            circle_points(cx, cy, spec.count, 0, spec.count);
            return PointCloud(std::move(flat), 2);
        }
        case ShapeKind::two_circles: {
            // Even split between the two circles; odd counts give the
            // extra point to the first.
            const double cx = spec.center.size() > 0 ? spec.center[0] : 0.0;
            const double cy = spec.center.size() > 1 ? spec.center[1] : 0.0;
            const double off = spec.separation / 2.0;
            const std::size_t first = (spec.count + 1) / 2;
            const std::size_t second = spec.count - first;
            circle_points(cx - off, cy, first, 0, first);
            circle_points(cx + off, cy, second, 0, second == 0 ? 1 : second);
            return PointCloud(std::move(flat), 2);
        }
        case ShapeKind::gaussian_blob: {
            const std::size_t dim = spec.center.empty() ? 2 : spec.center.size();
            for (std::size_t i = 0; i < spec.count; ++i)
                for (std::size_t d = 0; d < dim; ++d) {
                    const double c = d < spec.center.size() ? spec.center[d] : 0.0;
                    flat.push_back(c + spec.stddev * rng.next_normal());
                }
            return PointCloud(std::move(flat), dim);
        }
        case ShapeKind::from_file:
            return read_cloud_csv(spec.path);
    }
    throw ConfigError("unknown shape kind");
}

// ---------------------------------------------------------------------------
// CSV point-cloud files: one point per row, locale-independent decimals.

inline void format_double(std::string& out, double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

inline void write_cloud_csv(const PointCloud& cloud, const std::string& path, bool header = false) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open for writing: " + path);
    std::string line;
    if (header) {
        for (std::size_t d = 0; d < cloud.dim(); ++d) {
            if (d) line += ',';
            line += 'x';
            line += std::to_string(d);
        }
        line += '\n';
        out << line;
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        line.clear();
        auto p = cloud.point(i);
        for (std::size_t d = 0; d < cloud.dim(); ++d) {
            if (d) line += ',';
            format_double(line, p[d]);
        }
        line += '\n';
        out << line;
    }
}

inline PointCloud read_cloud_csv(const std::string& path, bool expect_header) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open point-cloud file: " + path);
    std::vector<double> flat;
    std::size_t dim = 0;
    std::string line;
    std::size_t lineno = 0;
    bool header_skipped = !expect_header;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (!header_skipped) {
            header_skipped = true;
            continue;
        }
        std::size_t cols = 0;
        const char* ptr = line.data();
        const char* end = line.data() + line.size();
        while (ptr < end) {
            const char* field_end = std::find(ptr, end, ',');
            double v = 0.0;
            auto [next, ec] = std::from_chars(ptr, field_end, v);
            if (ec != std::errc() || next != field_end)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" +
                                  std::string(ptr, field_end) + "'");
            flat.push_back(v);
            ++cols;
            ptr = field_end < end ? field_end + 1 : end;
        }
        if (dim == 0)
            dim = cols;
        else if (cols != dim)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    }
    if (flat.empty()) throw ConfigError(path + ": no points");
    return PointCloud(std::move(flat), dim);
}

} // namespace ppmreg
