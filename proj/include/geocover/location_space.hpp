#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace geocover {

/// Dense 0-based location index.
using LocationId = std::size_t;

struct Point {
    double x_km = 0.0;
    double y_km = 0.0;
};

/// Finite location universe with a precomputed Euclidean distance matrix
/// (kilometers). Immutable after construction.
class LocationSet {
public:
    static constexpr std::size_t kMaxLocations = 400;

    explicit LocationSet(std::vector<Point> points);

    std::size_t size() const noexcept { return points_.size(); }
    const Point& point(LocationId id) const;
    std::span<const Point> points() const noexcept { return points_; }

    /// Throws InvalidArgument when either id is out of range.
    double distance(LocationId a, LocationId b) const;

    /// Unchecked row-major access, for inner loops.
    double dist(LocationId a, LocationId b) const noexcept { return dist_[a * points_.size() + b]; }
    std::span<const double> distance_row(LocationId a) const noexcept {
        return {dist_.data() + a * points_.size(), points_.size()};
    }

    bool contains(LocationId id) const noexcept { return id < points_.size(); }

private:
    std::vector<Point> points_;
    std::vector<double> dist_;
};

/// rows x cols grid of square cells; locations sit at cell centroids, row-major.
LocationSet build_grid(std::size_t rows, std::size_t cols, double cell_km);

/// Reads the `id,x_km,y_km` CSV. Ids must be exactly 0..n-1 in any order.
LocationSet load_locations(const std::filesystem::path& path);
void save_locations(const LocationSet& ls, const std::filesystem::path& path);

/// Non-empty, duplicate-free subset of a LocationSet, kept sorted.
class TargetSet {
public:
    TargetSet(const LocationSet& ls, std::vector<LocationId> targets);

    std::span<const LocationId> ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    bool contains(LocationId id) const noexcept { return id < member_.size() && member_[id]; }

private:
    std::vector<LocationId> ids_;
    std::vector<bool> member_;
};

}  // namespace geocover
