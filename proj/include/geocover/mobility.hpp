#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geocover/location_space.hpp"
#include "geocover/rng.hpp"

namespace geocover {

using UserId = std::string;

enum class Period { daily, weekly };

struct TraceEvent {
    UserId user;
    std::int64_t time = 0;  // epoch seconds
    LocationId location = 0;
};

/// Time-sorted events plus the train/test boundary. Buckets are UTC calendar
/// days or ISO weeks (Monday start). Events whose bucket precedes the bucket
/// of `split` are training data, the rest are test data.
class TraceSet {
public:
    /// `start`/`end` default to the first event time and one past the last.
    TraceSet(std::vector<TraceEvent> events, Period period, std::int64_t split, std::size_t num_locations,
             std::optional<std::int64_t> start = std::nullopt, std::optional<std::int64_t> end = std::nullopt);

    std::span<const TraceEvent> events() const noexcept { return events_; }
    Period period() const noexcept { return period_; }
    std::int64_t split() const noexcept { return split_; }
    std::size_t num_locations() const noexcept { return num_locations_; }

    std::int64_t bucket(std::int64_t time) const noexcept;
    bool is_training(const TraceEvent& e) const noexcept { return bucket(e.time) < split_bucket_; }

    std::size_t train_periods() const noexcept { return static_cast<std::size_t>(split_bucket_ - first_bucket_); }
    std::size_t test_periods() const noexcept { return static_cast<std::size_t>(last_bucket_ - split_bucket_ + 1); }

    /// Distinct users in first-appearance order.
    const std::vector<UserId>& users() const noexcept { return users_; }
    bool has_user(const UserId& u) const { return by_user_.contains(u); }
    /// Indices into events() for one user; throws NotFound.
    const std::vector<std::size_t>& user_events(const UserId& u) const;

private:
    std::vector<TraceEvent> events_;
    Period period_;
    std::int64_t split_;
    std::size_t num_locations_;
    std::int64_t first_bucket_ = 0, split_bucket_ = 0, last_bucket_ = 0;
    std::vector<UserId> users_;
    std::unordered_map<UserId, std::vector<std::size_t>> by_user_;
};

/// Reads the `user,timestamp,loc_id` CSV. Location ids are checked against
/// `num_locations`.
std::vector<TraceEvent> load_trace_events(const std::filesystem::path& path, std::size_t num_locations);
void save_trace_events(std::span<const TraceEvent> events, const std::filesystem::path& path);

struct MobilityProfile {
    UserId user;
    std::vector<double> probs;  // indexed by LocationId
};

enum class ProfileMethod { frequency, poisson };

/// Share of training periods with at least one visit.
MobilityProfile profile_frequency(const TraceSet& traces, const UserId& user);
/// p = 1 - exp(-lambda), lambda = mean visits per training period.
MobilityProfile profile_poisson(const TraceSet& traces, const UserId& user);
MobilityProfile profile(const TraceSet& traces, const UserId& user, ProfileMethod method);
/// Profiles every user of the trace set, in users() order.
std::vector<MobilityProfile> profile_all(const TraceSet& traces, ProfileMethod method);

/// {l : probs[l] > delta}, ascending. delta must lie in (0,1).
std::vector<LocationId> frequent_locations(const MobilityProfile& profile, double delta);
/// Uniform draw among the frequent locations; nullopt when there are none.
std::optional<LocationId> pick_frequent_location(const MobilityProfile& profile, double delta, Rng& rng);

struct RocResult {
    std::vector<std::pair<double, double>> curve;  // (fpr, tpr), from (0,0) to (1,1)
    double auc = 0.0;
};

/// Threshold sweep over distinct scores; tied scores form one diagonal step,
/// so the trapezoid AUC counts ties as half. Throws UndefinedMetric when a
/// class is missing.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);

using UserLocation = std::pair<UserId, LocationId>;
RocResult roc_auc(const std::map<UserLocation, double>& scores, const std::map<UserLocation, int>& labels);

/// Scores every (user, location) pair of users with training data against
/// whether the user shows up there in the test periods.
RocResult profiling_roc(const TraceSet& traces, ProfileMethod method);

}  // namespace geocover
