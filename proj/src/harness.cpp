#include "geocover/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "geocover/errors.hpp"

namespace geocover {
namespace {

constexpr std::int64_t kDay = 86400;
// 2023-01-02, a Monday, so daily and weekly buckets both start clean.
constexpr std::int64_t kEpochDay = 19359;

std::int64_t period_seconds(Period p) { return p == Period::daily ? kDay : 7 * kDay; }

std::string trim(std::string s) {
    auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
    s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
    s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
    return s;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& s) {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw InvalidArgument("not a number: '" + s + "'");
    return v;
}

std::size_t to_size(const std::string& s) {
    std::size_t pos = 0;
    if (s.empty() || s.front() == '-') throw InvalidArgument("not a non-negative integer: '" + s + "'");
    auto v = std::stoull(s, &pos);
    if (pos != s.size()) throw InvalidArgument("not an integer: '" + s + "'");
    return static_cast<std::size_t>(v);
}

}  // namespace

void WorldConfig::validate() const {
    if (rows == 0 || cols == 0 || !(cell_km > 0.0)) throw InvalidArgument("grid dimensions must be positive");
    if (n_users == 0) throw InvalidArgument("world needs at least one user");
    if (!(bg_shape >= 0.0)) throw InvalidArgument("bg_shape must be non-negative");
    if (!(lambda_bg >= 0.0)) throw InvalidArgument("lambda_bg must be non-negative");
    if (!(home_rate_spread >= 0.0 && home_rate_spread < 1.0)) throw InvalidArgument("home_rate_spread must lie in [0,1)");
    if (!(lambda_home * (1.0 - home_rate_spread) > lambda_bg))
        throw InvalidArgument("every home rate must exceed lambda_bg");
    if (train_periods == 0 || test_periods == 0) throw InvalidArgument("need at least one train and one test period");
    if (prior == PriorShape::hotspot && !(hotspot_scale_km > 0.0))
        throw InvalidArgument("hotspot scale must be positive");
}

PriorDistribution world_prior(const WorldConfig& config, const LocationSet& ls) {
    if (config.prior == PriorShape::uniform) return PriorDistribution::uniform(ls.size());
    const double cx = static_cast<double>(config.cols) * config.cell_km / 2.0;
    const double cy = static_cast<double>(config.rows) * config.cell_km / 2.0;
    std::vector<double> w(ls.size());
    for (LocationId l = 0; l < ls.size(); ++l) {
        const auto& p = ls.point(l);
        w[l] = std::exp(-std::hypot(p.x_km - cx, p.y_km - cy) / config.hotspot_scale_km);
    }
    return PriorDistribution::normalized(std::move(w));
}

World generate_world(const WorldConfig& config) {
    config.validate();
    auto ls = build_grid(config.rows, config.cols, config.cell_km);
    auto truth = world_prior(config, ls);
    const std::size_t n = ls.size();
    Rng rng(config.seed);
    std::discrete_distribution<LocationId> home_dist(truth.probs().begin(), truth.probs().end());
    std::uniform_real_distribution<double> spread(1.0 - config.home_rate_spread, 1.0 + config.home_rate_spread);
    const std::int64_t len = period_seconds(config.period);
    std::uniform_int_distribution<std::int64_t> offset(0, len - 1);
    std::gamma_distribution<double> bg_rate(config.bg_shape > 0.0 ? config.bg_shape : 1.0,
                                            config.bg_shape > 0.0 ? config.lambda_bg / config.bg_shape : 1.0);

    const std::size_t periods = config.train_periods + config.test_periods;
    const std::int64_t start = kEpochDay * kDay;
    std::vector<TraceEvent> events;
    std::vector<LocationId> homes(config.n_users);
    const int width = static_cast<int>(std::to_string(config.n_users - 1).size());
    for (std::size_t u = 0; u < config.n_users; ++u) {
        std::ostringstream name;
        name << 'u' << std::setw(width) << std::setfill('0') << u;
        const std::string user = name.str();
        homes[u] = home_dist(rng);
        std::vector<double> rate(n, config.lambda_bg);
        rate[homes[u]] = config.lambda_home * spread(rng);
        if (config.bg_shape > 0.0 && config.lambda_bg > 0.0)
            for (LocationId l = 0; l < n; ++l)
                if (l != homes[u]) rate[l] = bg_rate(rng);
        for (std::size_t p = 0; p < periods; ++p) {
            const std::int64_t t0 = start + static_cast<std::int64_t>(p) * len;
            for (LocationId l = 0; l < n; ++l) {
                const int count = rate[l] > 0.0 ? std::poisson_distribution<int>(rate[l])(rng) : 0;
                for (int c = 0; c < count; ++c) events.push_back({user, t0 + offset(rng), l});
            }
        }
    }
    const std::int64_t split = start + static_cast<std::int64_t>(config.train_periods) * len;
    const std::int64_t end = start + static_cast<std::int64_t>(periods) * len;
    TraceSet traces(std::move(events), config.period, split, n, start, end);
    // users() lists first appearance in time order; re-key homes to match
    std::vector<LocationId> ordered;
    ordered.reserve(traces.users().size());
    for (const auto& u : traces.users()) ordered.push_back(homes[std::stoul(u.substr(1))]);
    return {std::move(ls), std::move(traces), std::move(truth), std::move(ordered)};
}

double evaluate_coverage(std::span<const UserId> selected, const TraceSet& traces, const TargetSet& targets) {
    if (selected.empty()) throw UndefinedMetric("coverage of an empty selection");
    std::size_t covered = 0;
    for (const auto& u : selected) {
        if (!traces.has_user(u)) continue;
        for (auto i : traces.user_events(u)) {
            const auto& e = traces.events()[i];
            if (!traces.is_training(e) && targets.contains(e.location)) {
                ++covered;
                break;
            }
        }
    }
    return static_cast<double>(covered) / static_cast<double>(selected.size());
}

std::vector<UserId> run_baseline_no(std::span<Client* const> clients, double delta, const TargetSet& targets,
                                    std::size_t alpha, Rng& rng) {
    std::vector<UserId> hits;
    for (auto* c : clients) {
        auto l = c->upload_plain(delta, rng);
        if (l && targets.contains(*l)) hits.push_back(c->id());
    }
    std::shuffle(hits.begin(), hits.end(), rng);
    if (hits.size() > alpha) hits.resize(alpha);
    return hits;
}

std::vector<UserId> run_baseline_random(std::span<const UserId> users, std::size_t alpha, Rng& rng) {
    std::vector<UserId> out(users.begin(), users.end());
    std::shuffle(out.begin(), out.end(), rng);
    if (out.size() > alpha) out.resize(alpha);
    return out;
}

SelectionResult run_baseline_laplace(std::span<Client* const> clients, const LocationSet& ls,
                                     const TargetSet& targets, const SelectionParams& params, Rng& rng) {
    auto p = params;
    p.mechanism = Mechanism::laplace;
    return run_selection(clients, ls, targets, p, rng);
}

double parse_epsilon(const std::string& text) {
    std::string s = trim(text);
    if (s.rfind("ln", 0) == 0) {
        std::string arg = s.substr(2);
        if (!arg.empty() && arg.front() == '(' && arg.back() == ')') arg = arg.substr(1, arg.size() - 2);
        const double v = to_double(arg);
        if (!(v > 1.0)) throw InvalidArgument("epsilon must be positive: '" + text + "'");
        return std::log(v);
    }
    const double v = to_double(s);
    if (!(v > 0.0)) throw InvalidArgument("epsilon must be positive: '" + text + "'");
    return v;
}

std::string format_epsilon(double epsilon) {
    for (int k : {2, 4, 6, 8})
        if (std::abs(epsilon - std::log(static_cast<double>(k))) < 1e-12) return "ln" + std::to_string(k);
    std::ostringstream s;
    s << std::setprecision(10) << epsilon;
    return s.str();
}

std::string to_string(Method m) {
    switch (m) {
        case Method::ours: return "ours";
        case Method::laplace: return "laplace";
        case Method::no: return "no";
        case Method::random: return "random";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    for (auto m : {Method::ours, Method::laplace, Method::no, Method::random})
        if (to_string(m) == s) return m;
    throw InvalidArgument("unknown method '" + s + "'");
}

std::size_t ExperimentConfig::alpha() const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(alpha_frac * static_cast<double>(world.n_users))));
}

void ExperimentConfig::validate() const {
    world.validate();
    if (epsilons.empty() || deltas.empty() || methods.empty()) throw InvalidArgument("empty sweep list");
    for (double e : epsilons)
        if (!(e > 0.0)) throw InvalidArgument("epsilon must be positive");
    for (double d : deltas)
        if (!(d > 0.0 && d < 1.0)) throw InvalidArgument("delta must lie in (0,1)");
    if (!(alpha_frac > 0.0 && alpha_frac <= 1.0)) throw InvalidArgument("alpha_frac must lie in (0,1]");
    if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("rho must lie in (0,1)");
    if (k == 0 || k > world.n_users) throw InvalidArgument("k must lie in [1, N]");
    if (trials == 0) throw InvalidArgument("need at least one trial");
    const std::size_t n = world.rows * world.cols;
    if (targets.empty()) {
        if (target_counts.empty()) throw InvalidArgument("no target counts");
        for (auto c : target_counts)
            if (c == 0 || c > n) throw InvalidArgument("target count must lie in [1, |L|]");
    } else {
        for (auto t : targets)
            if (t >= n) throw InvalidArgument("target outside the grid");
    }
}

void apply_config_entry(ExperimentConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    auto& w = c.world;
    if (key == "rows") w.rows = to_size(v);
    else if (key == "cols") w.cols = to_size(v);
    else if (key == "cell_km") w.cell_km = to_double(v);
    else if (key == "n_users") w.n_users = to_size(v);
    else if (key == "prior") {
        if (v == "uniform") w.prior = PriorShape::uniform;
        else if (v == "hotspot") w.prior = PriorShape::hotspot;
        else throw InvalidArgument("prior must be uniform or hotspot");
    }
    else if (key == "hotspot_scale_km") w.hotspot_scale_km = to_double(v);
    else if (key == "lambda_home") w.lambda_home = to_double(v);
    else if (key == "home_rate_spread") w.home_rate_spread = to_double(v);
    else if (key == "lambda_bg") w.lambda_bg = to_double(v);
    else if (key == "bg_shape") w.bg_shape = to_double(v);
    else if (key == "train_periods") w.train_periods = to_size(v);
    else if (key == "test_periods") w.test_periods = to_size(v);
    else if (key == "period") {
        if (v == "daily") w.period = Period::daily;
        else if (v == "weekly") w.period = Period::weekly;
        else throw InvalidArgument("period must be daily or weekly");
    }
    else if (key == "seed") c.seed = to_size(v);
    else if (key == "epsilon") {
        c.epsilons.clear();
        for (const auto& e : split_list(v)) c.epsilons.push_back(parse_epsilon(e));
    }
    else if (key == "delta") {
        c.deltas.clear();
        for (const auto& d : split_list(v)) c.deltas.push_back(to_double(d));
    }
    else if (key == "n_targets") {
        c.target_counts.clear();
        for (const auto& t : split_list(v)) c.target_counts.push_back(to_size(t));
    }
    else if (key == "targets") {
        c.targets.clear();
        for (const auto& t : split_list(v)) c.targets.push_back(to_size(t));
    }
    else if (key == "alpha_frac") c.alpha_frac = to_double(v);
    else if (key == "rho") c.rho = to_double(v);
    else if (key == "k") c.k = to_size(v);
    else if (key == "p_min") c.p_min = to_double(v);
    else if (key == "laplace_kernel_scale") c.laplace_kernel_scale = to_double(v);
    else if (key == "profiler") {
        if (v == "poisson") c.profiler = ProfileMethod::poisson;
        else if (v == "frequency") c.profiler = ProfileMethod::frequency;
        else throw InvalidArgument("profiler must be poisson or frequency");
    }
    else if (key == "beta_pool") {
        if (v == "population") c.beta_pool = BetaPool::population;
        else if (v == "remaining") c.beta_pool = BetaPool::remaining;
        else throw InvalidArgument("beta_pool must be population or remaining");
    }
    else if (key == "methods") {
        c.methods.clear();
        for (const auto& m : split_list(v)) c.methods.push_back(parse_method(m));
    }
    else if (key == "trials") c.trials = to_size(v);
    else throw InvalidArgument("unknown config key '" + key + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", lineno);
        try {
            apply_config_entry(c, trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw ParseError(e.what(), lineno);
        } catch (const std::out_of_range& e) {
            throw ParseError(std::string("value out of range: ") + e.what(), lineno);
        }
    }
    return c;
}

std::vector<std::unique_ptr<Client>> make_clients(const TraceSet& traces, ProfileMethod method) {
    auto profiles = profile_all(traces, method);
    std::vector<std::unique_ptr<Client>> out;
    out.reserve(profiles.size());
    for (auto& p : profiles) out.push_back(std::make_unique<ProfileClient>(std::move(p)));
    return out;
}

const Summary* ExperimentReport::find(Method m, double epsilon, double delta, std::size_t n_targets) const {
    for (const auto& s : summaries)
        if (s.method == m && s.epsilon == epsilon && s.delta == delta && s.n_targets == n_targets) return &s;
    return nullptr;
}

namespace {

struct TrialOutput {
    std::vector<ReportRow> rows;
    std::vector<double> kl_trajectory;
};

TrialOutput run_trial(const ExperimentConfig& config, std::size_t trial) {
    TrialOutput out;
    const std::uint64_t trial_seed = mix_seed(config.seed, trial);
    auto wc = config.world;
    wc.seed = trial_seed;
    auto world = generate_world(wc);
    auto owned = make_clients(world.traces, config.profiler);
    std::vector<Client*> clients;
    for (auto& c : owned) clients.push_back(c.get());
    const auto& users = world.traces.users();
    const std::size_t alpha = config.alpha();

    Rng target_rng(mix_seed(trial_seed, 0x7a57));
    std::vector<TargetSet> target_sets;
    if (!config.targets.empty()) {
        target_sets.emplace_back(world.locations, config.targets);
    } else {
        for (auto count : config.target_counts) {
            std::vector<LocationId> all(world.locations.size());
            std::iota(all.begin(), all.end(), 0);
            std::shuffle(all.begin(), all.end(), target_rng);
            all.resize(count);
            target_sets.emplace_back(world.locations, std::move(all));
        }
    }

    // the rng ignores eps and delta so sweeps compare on common random numbers
    bool first = true;
    for (double eps : config.epsilons) {
        for (double delta : config.deltas) {
            for (std::size_t ti = 0; ti < target_sets.size(); ++ti) {
                const auto& targets = target_sets[ti];
                for (auto method : config.methods) {
                    ReportRow row{method, eps, delta, targets.size(), trial, std::nullopt, 0, std::nullopt, {}};
                    Rng rng(mix_seed(trial_seed, (ti + 1) * 8 + static_cast<std::uint64_t>(method)));
                    try {
                        std::vector<UserId> selected;
                        if (method == Method::ours || method == Method::laplace) {
                            SelectionParams sp;
                            sp.epsilon = eps;
                            sp.delta = delta;
                            sp.k = config.k;
                            sp.alpha = alpha;
                            sp.rho = config.rho;
                            sp.p_min = config.p_min;
                            sp.laplace_kernel_scale = config.laplace_kernel_scale;
                            sp.truth = world.truth;
                            sp.execution = Execution::serial;
                            sp.beta_pool = config.beta_pool;
                            auto res = method == Method::ours
                                           ? run_selection(clients, world.locations, targets, sp, rng)
                                           : run_baseline_laplace(clients, world.locations, targets, sp, rng);
                            selected = std::move(res.selected);
                            row.kl_final = res.kl_trajectory.back();
                            if (method == Method::ours && first) out.kl_trajectory = res.kl_trajectory;
                        } else if (method == Method::no) {
                            selected = run_baseline_no(clients, delta, targets, alpha, rng);
                        } else {
                            selected = run_baseline_random(users, alpha, rng);
                        }
                        row.selected = selected.size();
                        row.coverage = evaluate_coverage(selected, world.traces, targets);
                    } catch (const std::exception& e) {
                        row.error = e.what();
                    }
                    out.rows.push_back(std::move(row));
                }
                first = false;
            }
        }
    }
    return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
    config.validate();
    std::vector<TrialOutput> trials(config.trials);
    const auto count = static_cast<std::int64_t>(config.trials);
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < count; ++t) trials[t] = run_trial(config, static_cast<std::size_t>(t));

    ExperimentReport report{config, {}, {}, {}};
    for (auto& t : trials) {
        report.rows.insert(report.rows.end(), t.rows.begin(), t.rows.end());
        report.kl_trajectories.push_back(std::move(t.kl_trajectory));
    }

    const std::size_t per_trial = trials.empty() ? 0 : trials.front().rows.size();
    for (std::size_t i = 0; i < per_trial; ++i) {
        const auto& proto = trials.front().rows[i];
        Summary s;
        s.method = proto.method;
        s.epsilon = proto.epsilon;
        s.delta = proto.delta;
        s.n_targets = proto.n_targets;
        double sum = 0.0, sumsq = 0.0, sel = 0.0, kl = 0.0;
        std::size_t kl_n = 0;
        for (const auto& t : trials) {
            const auto& r = t.rows[i];
            if (!r.coverage) {
                ++s.failed;
                continue;
            }
            ++s.ok;
            sum += *r.coverage;
            sumsq += *r.coverage * *r.coverage;
            sel += static_cast<double>(r.selected);
            if (r.kl_final) {
                kl += *r.kl_final;
                ++kl_n;
            }
        }
        if (s.ok > 0) {
            const double n = static_cast<double>(s.ok);
            s.coverage_mean = sum / n;
            s.selected_mean = sel / n;
            if (s.ok > 1) {
                const double var = std::max(0.0, (sumsq - n * s.coverage_mean * s.coverage_mean) / (n - 1.0));
                s.coverage_stderr = std::sqrt(var / n);
            }
        }
        if (kl_n > 0) s.kl_mean = kl / static_cast<double>(kl_n);
        report.summaries.push_back(s);
    }
    return report;
}

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
    out << "method,epsilon,delta,n_targets,trial,coverage,selected,kl_final\n";
    out << std::setprecision(10);
    for (const auto& r : report.rows) {
        out << to_string(r.method) << ',' << r.epsilon << ',' << r.delta << ',' << r.n_targets << ',' << r.trial << ',';
        if (r.coverage) out << *r.coverage;
        out << ',' << r.selected << ',';
        if (r.kl_final) out << *r.kl_final;
        out << '\n';
    }
}

void write_report_json(const ExperimentReport& report, std::ostream& out) {
    using nlohmann::json;
    const auto& c = report.config;
    json j;
    j["parameters"] = {
        {"rows", c.world.rows},
        {"cols", c.world.cols},
        {"cell_km", c.world.cell_km},
        {"n_users", c.world.n_users},
        {"prior", c.world.prior == PriorShape::uniform ? "uniform" : "hotspot"},
        {"hotspot_scale_km", c.world.hotspot_scale_km},
        {"lambda_home", c.world.lambda_home},
        {"home_rate_spread", c.world.home_rate_spread},
        {"lambda_bg", c.world.lambda_bg},
        {"bg_shape", c.world.bg_shape},
        {"train_periods", c.world.train_periods},
        {"test_periods", c.world.test_periods},
        {"period", c.world.period == Period::daily ? "daily" : "weekly"},
        {"epsilons", c.epsilons},
        {"deltas", c.deltas},
        {"target_counts", c.target_counts},
        {"targets", c.targets},
        {"alpha", c.alpha()},
        {"alpha_frac", c.alpha_frac},
        {"rho", c.rho},
        {"k", c.k},
        {"p_min", c.p_min},
        {"laplace_kernel_scale", c.laplace_kernel_scale},
        {"profiler", c.profiler == ProfileMethod::poisson ? "poisson" : "frequency"},
        {"beta_pool", c.beta_pool == BetaPool::population ? "population" : "remaining"},
        {"trials", c.trials},
        {"seed", c.seed},
    };
    auto& sums = j["summary"] = json::array();
    for (const auto& s : report.summaries) {
        json e = {{"method", to_string(s.method)},
                  {"epsilon", s.epsilon},
                  {"delta", s.delta},
                  {"n_targets", s.n_targets},
                  {"trials_ok", s.ok},
                  {"trials_failed", s.failed},
                  {"coverage_mean", s.coverage_mean},
                  {"coverage_stderr", s.coverage_stderr},
                  {"selected_mean", s.selected_mean}};
        e["kl_mean"] = s.kl_mean ? json(*s.kl_mean) : json(nullptr);
        sums.push_back(std::move(e));
    }
    auto& errors = j["errors"] = json::array();
    for (const auto& r : report.rows)
        if (!r.error.empty())
            errors.push_back({{"method", to_string(r.method)}, {"trial", r.trial}, {"message", r.error}});
    j["kl_trajectories"] = report.kl_trajectories;
    out << j.dump(2) << '\n';
}

}  // namespace geocover
