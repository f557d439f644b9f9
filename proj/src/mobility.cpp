#include "geocover/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "csv.hpp"
#include "geocover/errors.hpp"

namespace geocover {
namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

}  // namespace

TraceSet::TraceSet(std::vector<TraceEvent> events, Period period, std::int64_t split, std::size_t num_locations,
                   std::optional<std::int64_t> start, std::optional<std::int64_t> end)
    : events_(std::move(events)), period_(period), split_(split), num_locations_(num_locations) {
    if (num_locations_ == 0) throw InvalidArgument("trace set needs at least one location");
    std::stable_sort(events_.begin(), events_.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.time < b.time; });
    for (const auto& e : events_) {
        if (e.time < 0) throw InvalidArgument("negative timestamp for user " + e.user);
        if (e.location >= num_locations_)
            throw InvalidArgument("event location " + std::to_string(e.location) + " out of range");
    }
    if (!start && events_.empty()) throw InvalidArgument("empty trace set needs an explicit window");
    std::int64_t lo = start.value_or(events_.empty() ? 0 : events_.front().time);
    std::int64_t hi = end.value_or(events_.empty() ? 0 : events_.back().time + 1);
    if (!events_.empty() && (events_.front().time < lo || events_.back().time >= hi))
        throw InvalidArgument("events fall outside the trace window");
    first_bucket_ = bucket(lo);
    split_bucket_ = bucket(split_);
    last_bucket_ = bucket(hi - 1);
    if (split_bucket_ <= first_bucket_ || split_bucket_ > last_bucket_)
        throw InvalidArgument("split must leave at least one training and one test period");

    for (std::size_t i = 0; i < events_.size(); ++i) {
        auto [it, inserted] = by_user_.try_emplace(events_[i].user);
        if (inserted) users_.push_back(events_[i].user);
        it->second.push_back(i);
    }
}

std::int64_t TraceSet::bucket(std::int64_t time) const noexcept {
    std::int64_t day = floor_div(time, kDay);
    if (period_ == Period::daily) return day;
    // 1970-01-01 was a Thursday; shift so that weeks start on Monday.
    return floor_div(day + 3, 7);
}

const std::vector<std::size_t>& TraceSet::user_events(const UserId& u) const {
    auto it = by_user_.find(u);
    if (it == by_user_.end()) throw NotFound("unknown user '" + u + "'");
    return it->second;
}

std::vector<TraceEvent> load_trace_events(const std::filesystem::path& path, std::size_t num_locations) {
    std::vector<TraceEvent> out;
    csv::for_each_row(path.string(), {"user", "timestamp", "loc_id"}, [&](const auto& f, std::size_t line) {
        if (f[0].empty()) throw ParseError("empty user id", line);
        auto t = csv::parse_int(f[1], line, "timestamp");
        if (t < 0) throw ParseError("negative timestamp", line);
        auto loc = csv::parse_int(f[2], line, "loc_id");
        if (loc < 0 || static_cast<std::size_t>(loc) >= num_locations)
            throw ParseError("loc_id " + std::to_string(loc) + " not in location set", line);
        out.push_back({std::string(f[0]), t, static_cast<LocationId>(loc)});
    });
    return out;
}

void save_trace_events(std::span<const TraceEvent> events, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "user,timestamp,loc_id\n";
    for (const auto& e : events) out << e.user << ',' << e.time << ',' << e.location << '\n';
}

MobilityProfile profile_frequency(const TraceSet& traces, const UserId& user) {
    const auto& idx = traces.user_events(user);
    const std::size_t n = traces.num_locations();
    MobilityProfile p{user, std::vector<double>(n, 0.0)};
    // events are time-sorted, so a repeated (location, bucket) pair is
    // detected by remembering the last bucket seen per location
    std::vector<std::int64_t> last(n, std::numeric_limits<std::int64_t>::min());
    std::vector<std::size_t> periods(n, 0);
    for (auto i : idx) {
        const auto& e = traces.events()[i];
        if (!traces.is_training(e)) continue;
        auto b = traces.bucket(e.time);
        if (last[e.location] != b) {
            last[e.location] = b;
            ++periods[e.location];
        }
    }
    const double total = static_cast<double>(traces.train_periods());
    for (std::size_t l = 0; l < n; ++l) p.probs[l] = static_cast<double>(periods[l]) / total;
    return p;
}

MobilityProfile profile_poisson(const TraceSet& traces, const UserId& user) {
    const auto& idx = traces.user_events(user);
    const std::size_t n = traces.num_locations();
    std::vector<std::size_t> visits(n, 0);
    for (auto i : idx) {
        const auto& e = traces.events()[i];
        if (traces.is_training(e)) ++visits[e.location];
    }
    MobilityProfile p{user, std::vector<double>(n, 0.0)};
    const double total = static_cast<double>(traces.train_periods());
    for (std::size_t l = 0; l < n; ++l) p.probs[l] = -std::expm1(-static_cast<double>(visits[l]) / total);
    return p;
}

MobilityProfile profile(const TraceSet& traces, const UserId& user, ProfileMethod method) {
    return method == ProfileMethod::frequency ? profile_frequency(traces, user) : profile_poisson(traces, user);
}

std::vector<MobilityProfile> profile_all(const TraceSet& traces, ProfileMethod method) {
    const auto& users = traces.users();
    std::vector<MobilityProfile> out(users.size());
    const auto count = static_cast<std::int64_t>(users.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < count; ++i) out[i] = profile(traces, users[i], method);
    return out;
}

std::vector<LocationId> frequent_locations(const MobilityProfile& profile, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    std::vector<LocationId> out;
    for (LocationId l = 0; l < profile.probs.size(); ++l)
        if (profile.probs[l] > delta) out.push_back(l);
    return out;
}

std::optional<LocationId> pick_frequent_location(const MobilityProfile& profile, double delta, Rng& rng) {
    auto freq = frequent_locations(profile, delta);
    if (freq.empty()) return std::nullopt;
    if (freq.size() == 1) return freq.front();
    std::uniform_int_distribution<std::size_t> pick(0, freq.size() - 1);
    return freq[pick(rng)];
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw InvalidArgument("labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetric("ROC needs at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });

    RocResult r;
    r.curve.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] ? tp : fp) += 1;
            ++i;
        }
        const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
        const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
        const auto [px, py] = r.curve.back();
        r.auc += (fpr - px) * (tpr + py) * 0.5;
        r.curve.emplace_back(fpr, tpr);
    }
    return r;
}

RocResult roc_auc(const std::map<UserLocation, double>& scores, const std::map<UserLocation, int>& labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("score and label key sets differ");
    std::vector<double> s;
    std::vector<int> y;
    s.reserve(scores.size());
    y.reserve(scores.size());
    for (const auto& [key, score] : scores) {
        auto it = labels.find(key);
        if (it == labels.end()) throw InvalidArgument("score without label for user '" + key.first + "'");
        s.push_back(score);
        y.push_back(it->second);
    }
    return roc_auc(s, y);
}

RocResult profiling_roc(const TraceSet& traces, ProfileMethod method) {
    const std::size_t n = traces.num_locations();
    std::vector<double> scores;
    std::vector<int> labels;
    auto profiles = profile_all(traces, method);
    for (std::size_t u = 0; u < profiles.size(); ++u) {
        const auto& idx = traces.user_events(profiles[u].user);
        std::vector<int> visited(n, 0);
        bool trained = false;
        for (auto i : idx) {
            const auto& e = traces.events()[i];
            if (traces.is_training(e))
                trained = true;
            else
                visited[e.location] = 1;
        }
        if (!trained) continue;
        for (LocationId l = 0; l < n; ++l) {
            scores.push_back(profiles[u].probs[l]);
            labels.push_back(visited[l]);
        }
    }
    return roc_auc(scores, labels);
}

}  // namespace geocover
