#include "geocover/location_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "csv.hpp"
#include "geocover/errors.hpp"

namespace geocover {

LocationSet::LocationSet(std::vector<Point> points) : points_(std::move(points)) {
    const std::size_t n = points_.size();
    if (n == 0) throw InvalidArgument("location set must not be empty");
    if (n > kMaxLocations)
        throw InvalidArgument("location set exceeds " + std::to_string(kMaxLocations) + " locations");
    dist_.assign(n * n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        if (!std::isfinite(points_[a].x_km) || !std::isfinite(points_[a].y_km))
            throw InvalidArgument("non-finite coordinate at location " + std::to_string(a));
        for (std::size_t b = a + 1; b < n; ++b) {
            double d = std::hypot(points_[a].x_km - points_[b].x_km, points_[a].y_km - points_[b].y_km);
            if (d == 0.0)
                throw InvalidArgument("locations " + std::to_string(a) + " and " + std::to_string(b) +
                                      " share coordinates");
            dist_[a * n + b] = d;
            dist_[b * n + a] = d;
        }
    }
}

const Point& LocationSet::point(LocationId id) const {
    if (!contains(id)) throw InvalidArgument("location id " + std::to_string(id) + " out of range");
    return points_[id];
}

double LocationSet::distance(LocationId a, LocationId b) const {
    if (!contains(a) || !contains(b))
        throw InvalidArgument("location id out of range (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") for set of size " + std::to_string(size()));
    return dist(a, b);
}

LocationSet build_grid(std::size_t rows, std::size_t cols, double cell_km) {
    if (rows == 0 || cols == 0) throw InvalidArgument("grid dimensions must be positive");
    if (!(cell_km > 0.0) || !std::isfinite(cell_km)) throw InvalidArgument("cell size must be positive");
    std::vector<Point> pts;
    pts.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            pts.push_back({(static_cast<double>(c) + 0.5) * cell_km, (static_cast<double>(r) + 0.5) * cell_km});
    return LocationSet(std::move(pts));
}

LocationSet load_locations(const std::filesystem::path& path) {
    std::vector<std::pair<std::int64_t, Point>> rows;
    std::vector<std::size_t> lines;
    csv::for_each_row(path.string(), {"id", "x_km", "y_km"}, [&](const auto& f, std::size_t line) {
        auto id = csv::parse_int(f[0], line, "id");
        if (id < 0) throw ParseError("negative id", line);
        rows.push_back({id, {csv::parse_double(f[1], line, "x_km"), csv::parse_double(f[2], line, "y_km")}});
        lines.push_back(line);
    });
    const std::size_t n = rows.size();
    std::vector<Point> pts(n);
    std::vector<std::size_t> seen(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        auto id = static_cast<std::size_t>(rows[i].first);
        if (id >= n)
            throw ParseError("id " + std::to_string(id) + " outside dense range 0.." + std::to_string(n - 1),
                             lines[i]);
        if (seen[id] != 0)
            throw ParseError("duplicate id " + std::to_string(id) + " (first seen on line " +
                                 std::to_string(seen[id]) + ")",
                             lines[i]);
        seen[id] = lines[i];
        pts[id] = rows[i].second;
    }
    try {
        return LocationSet(std::move(pts));
    } catch (const InvalidArgument& e) {
        throw ParseError(std::string(path.string()) + ": " + e.what());
    }
}

void save_locations(const LocationSet& ls, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "id,x_km,y_km\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t i = 0; i < ls.size(); ++i) out << i << ',' << ls.point(i).x_km << ',' << ls.point(i).y_km << '\n';
}

TargetSet::TargetSet(const LocationSet& ls, std::vector<LocationId> targets) : member_(ls.size(), false) {
    if (targets.empty()) throw InvalidArgument("target set must not be empty");
    for (auto t : targets) {
        if (!ls.contains(t)) throw InvalidArgument("target " + std::to_string(t) + " not in location set");
        if (member_[t]) throw InvalidArgument("duplicate target " + std::to_string(t));
        member_[t] = true;
    }
    ids_ = std::move(targets);
    std::sort(ids_.begin(), ids_.end());
}

}  // namespace geocover
