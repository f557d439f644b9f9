#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geocover/errors.hpp"
#include "geocover/harness.hpp"
#include "geocover/location_space.hpp"
#include "geocover/mobility.hpp"
#include "geocover/privacy.hpp"
#include "geocover/selection.hpp"
#include "geocover/synthesis.hpp"

namespace fs = std::filesystem;
using namespace geocover;
using nlohmann::json;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::string out_dir = ".";
    std::string config;
};

// Relative output paths land in --out-dir; inputs are taken as given.
fs::path out_path(const Globals& g, const std::string& name) {
    fs::path p(name);
    if (p.is_absolute()) return p;
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / p;
}

ExperimentConfig base_config(const Globals& g) {
    ExperimentConfig c = g.config.empty() ? ExperimentConfig{} : load_config(g.config);
    if (g.seed_given) c.seed = g.seed;
    return c;
}

std::vector<LocationId> parse_ids(const std::string& text) {
    std::vector<LocationId> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        std::size_t pos = 0;
        long long v = std::stoll(item, &pos);
        if (v < 0) throw InvalidArgument("negative location id in '" + text + "'");
        out.push_back(static_cast<LocationId>(v));
    }
    if (out.empty()) throw InvalidArgument("no location ids in '" + text + "'");
    return out;
}

Period parse_period(const std::string& s) {
    if (s == "daily") return Period::daily;
    if (s == "weekly") return Period::weekly;
    throw InvalidArgument("period must be daily or weekly");
}

ProfileMethod parse_profiler(const std::string& s) {
    if (s == "poisson") return ProfileMethod::poisson;
    if (s == "frequency") return ProfileMethod::frequency;
    throw InvalidArgument("profiler must be poisson or frequency");
}

// Start of the bucket holding `t`: a UTC day, or the Monday of its ISO week.
std::int64_t bucket_start(std::int64_t t, Period p) {
    auto floor_div = [](std::int64_t a, std::int64_t b) { return a / b - ((a % b != 0) && ((a < 0) != (b < 0))); };
    const std::int64_t day = floor_div(t, 86400);
    if (p == Period::daily) return day * 86400;
    return (floor_div(day + 3, 7) * 7 - 3) * 86400;
}

struct TraceOptions {
    std::string traces;
    std::string period = "daily";
    std::size_t train_periods = 0;  // 0: take it from the config
    std::int64_t split = 0;
    bool split_given = false;
};

void add_trace_options(CLI::App* app, TraceOptions& o) {
    app->add_option("--traces", o.traces, "user,timestamp,loc_id CSV")->required()->check(CLI::ExistingFile);
    app->add_option("--period", o.period, "daily or weekly")->check(CLI::IsMember({"daily", "weekly"}));
    app->add_option("--train-periods", o.train_periods, "training periods counted from the first event");
    app->add_option("--split", o.split, "epoch second where the test data starts (overrides --train-periods)")
        ->each([&o](const std::string&) { o.split_given = true; });
}

TraceSet load_traces(const TraceOptions& o, const LocationSet& ls, const ExperimentConfig& c) {
    auto events = load_trace_events(o.traces, ls.size());
    if (events.empty()) throw InvalidArgument(o.traces + " has no events");
    const Period period = parse_period(o.period);
    std::int64_t first = events.front().time;
    for (const auto& e : events) first = std::min(first, e.time);
    const std::int64_t start = bucket_start(first, period);
    std::int64_t split = o.split;
    if (!o.split_given) {
        const std::size_t n = o.train_periods ? o.train_periods : c.world.train_periods;
        const std::int64_t len = period == Period::daily ? 86400 : 7 * 86400;
        split = start + static_cast<std::int64_t>(n) * len;
    }
    return TraceSet(std::move(events), period, split, ls.size(), start);
}

PriorDistribution read_prior(const std::string& arg, const LocationSet& ls) {
    if (arg == "uniform") return PriorDistribution::uniform(ls.size());
    return load_prior(arg, ls.size());
}

json group_json(const GroupStats& g) {
    return {{"size", g.size},         {"nulls", g.nulls},         {"null_fraction", g.null_fraction},
            {"skipped", g.skipped},   {"report", g.report},       {"beta", g.beta},
            {"objective", g.objective}, {"matches", g.matches}, {"selected", g.selected}};
}

// Users listed in a select report JSON, or one user per line.
std::vector<UserId> read_selected(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    if (fs::path(path).extension() == ".json") {
        json j = json::parse(in);
        return j.at("selected").get<std::vector<UserId>>();
    }
    std::vector<UserId> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geocover: private crowd-coverage policies and user selection"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "master seed")->each([&g](const std::string&) { g.seed_given = true; });
    app.add_option("--out-dir", g.out_dir, "directory for relative output paths");
    app.add_option("--config", g.config, "key=value config file")->check(CLI::ExistingFile);

    // gen-world
    auto* gen = app.add_subcommand("gen-world", "write a synthetic grid world (locations, traces, true prior)");
    std::size_t gen_rows = 0, gen_cols = 0, gen_users = 0;
    gen->add_option("--rows", gen_rows);
    gen->add_option("--cols", gen_cols);
    gen->add_option("--n-users", gen_users);

    // profile
    auto* prof = app.add_subcommand("profile", "profile users from their training traces");
    TraceOptions prof_traces;
    std::string prof_locations, prof_method = "poisson", prof_out = "profiles.csv";
    add_trace_options(prof, prof_traces);
    prof->add_option("--locations", prof_locations)->required()->check(CLI::ExistingFile);
    prof->add_option("--method", prof_method)->check(CLI::IsMember({"poisson", "frequency"}));
    prof->add_option("--out", prof_out, "user,loc_id,prob CSV");

    // synthesize
    auto* syn = app.add_subcommand("synthesize", "solve for the coverage-optimal DP policy");
    std::string syn_locations, syn_prior = "uniform", syn_targets, syn_eps, syn_out = "policy.json";
    std::size_t syn_n = 0, syn_alpha = 0, syn_report = 0;
    double syn_rho = -1.0;
    std::string syn_form = "column";
    syn->add_option("--locations", syn_locations)->required()->check(CLI::ExistingFile);
    syn->add_option("--prior", syn_prior, "id,prob CSV or 'uniform'");
    syn->add_option("--targets", syn_targets, "comma-separated location ids")->required();
    syn->add_option("--epsilon", syn_eps, "ln2|ln4|ln6|ln8 or a real");
    syn->add_option("--n-users", syn_n)->required();
    syn->add_option("--alpha", syn_alpha)->required();
    syn->add_option("--rho", syn_rho);
    syn->add_option("--report", syn_report, "reported location to select on");
    syn->add_option("--formulation", syn_form)->check(CLI::IsMember({"column", "full"}));
    syn->add_option("--out", syn_out);

    // select
    auto* sel = app.add_subcommand("select", "run grouped selection on a trace file");
    TraceOptions sel_traces;
    std::string sel_locations, sel_targets, sel_eps, sel_report = "select.json", sel_truth, sel_mech = "optimal",
                                                    sel_profiler;
    double sel_delta = -1.0, sel_alpha_frac = -1.0, sel_rho = -1.0;
    std::size_t sel_k = 0, sel_alpha = 0;
    add_trace_options(sel, sel_traces);
    sel->add_option("--locations", sel_locations)->required()->check(CLI::ExistingFile);
    sel->add_option("--targets", sel_targets)->required();
    sel->add_option("--epsilon", sel_eps);
    sel->add_option("--delta", sel_delta);
    sel->add_option("--k", sel_k);
    sel->add_option("--alpha-frac", sel_alpha_frac);
    sel->add_option("--alpha", sel_alpha, "absolute alpha (overrides --alpha-frac)");
    sel->add_option("--rho", sel_rho);
    sel->add_option("--truth", sel_truth, "id,prob CSV of the true prior, enables the KL trajectory")
        ->check(CLI::ExistingFile);
    sel->add_option("--mechanism", sel_mech)->check(CLI::IsMember({"optimal", "laplace"}));
    sel->add_option("--profiler", sel_profiler)->check(CLI::IsMember({"poisson", "frequency"}));
    sel->add_option("--report", sel_report, "output JSON");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "coverage of a selection on the test periods");
    TraceOptions ev_traces;
    std::string ev_locations, ev_targets, ev_selected;
    add_trace_options(ev, ev_traces);
    ev->add_option("--locations", ev_locations)->required()->check(CLI::ExistingFile);
    ev->add_option("--targets", ev_targets)->required();
    ev->add_option("--selected", ev_selected, "select report JSON or one user per line")
        ->required()
        ->check(CLI::ExistingFile);

    // experiment
    auto* ex = app.add_subcommand("experiment", "Ours vs Laplace vs NO vs Random over seeded trials");
    std::size_t ex_trials = 0;
    std::string ex_eps, ex_delta, ex_nt, ex_targets, ex_methods, ex_csv = "report.csv", ex_json = "report.json";
    ex->add_option("--trials", ex_trials);
    ex->add_option("--epsilon", ex_eps, "comma-separated list");
    ex->add_option("--delta", ex_delta, "comma-separated list");
    ex->add_option("--n-targets", ex_nt, "comma-separated list");
    ex->add_option("--targets", ex_targets, "fixed targets for every trial");
    ex->add_option("--methods", ex_methods, "subset of ours,laplace,no,random");
    ex->add_option("--csv", ex_csv);
    ex->add_option("--json", ex_json);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = base_config(g);

        if (*gen) {
            auto w = cfg.world;
            w.seed = cfg.seed;
            if (gen_rows) w.rows = gen_rows;
            if (gen_cols) w.cols = gen_cols;
            if (gen_users) w.n_users = gen_users;
            auto world = generate_world(w);
            save_locations(world.locations, out_path(g, "locations.csv"));
            save_trace_events(world.traces.events(), out_path(g, "traces.csv"));
            save_prior(world.truth, out_path(g, "truth.csv"));
            std::ofstream homes(out_path(g, "homes.csv"));
            homes << "user,loc_id\n";
            for (std::size_t i = 0; i < world.homes.size(); ++i)
                homes << world.traces.users()[i] << ',' << world.homes[i] << '\n';
            std::cout << "locations=" << world.locations.size() << " users=" << world.traces.users().size()
                      << " events=" << world.traces.events().size() << " split=" << world.traces.split() << '\n';
        } else if (*prof) {
            auto ls = load_locations(prof_locations);
            auto traces = load_traces(prof_traces, ls, cfg);
            const auto method = parse_profiler(prof_method);
            auto profiles = profile_all(traces, method);
            std::ofstream out(out_path(g, prof_out));
            out << "user,loc_id,prob\n" << std::setprecision(10);
            for (const auto& p : profiles)
                for (LocationId l = 0; l < p.probs.size(); ++l)
                    if (p.probs[l] > 0.0) out << p.user << ',' << l << ',' << p.probs[l] << '\n';
            std::cout << "users=" << profiles.size() << " train_periods=" << traces.train_periods();
            try {
                std::cout << " auc=" << profiling_roc(traces, method).auc;
            } catch (const UndefinedMetric&) {
                std::cout << " auc=undefined";
            }
            std::cout << '\n';
        } else if (*syn) {
            auto ls = load_locations(syn_locations);
            SynthesisConfig sc{syn_eps.empty() ? cfg.epsilons.front() : parse_epsilon(syn_eps),
                               TargetSet(ls, parse_ids(syn_targets)),
                               syn_n,
                               syn_alpha,
                               syn_rho > 0.0 ? syn_rho : cfg.rho,
                               syn_report,
                               cfg.p_min};
            sc.formulation = syn_form == "full" ? LpFormulation::full : LpFormulation::column;
            auto res = synthesize(read_prior(syn_prior, ls), ls, sc);
            save_policy(res.policy, out_path(g, syn_out));
            std::cout << std::setprecision(10) << "report=" << res.report << " beta=" << res.beta
                      << " objective=" << res.objective << " iterations=" << res.lp_iterations << '\n';
        } else if (*sel) {
            auto ls = load_locations(sel_locations);
            auto traces = load_traces(sel_traces, ls, cfg);
            const auto profiler = sel_profiler.empty() ? cfg.profiler : parse_profiler(sel_profiler);
            auto owned = make_clients(traces, profiler);
            std::vector<Client*> clients;
            for (auto& c : owned) clients.push_back(c.get());
            TargetSet targets(ls, parse_ids(sel_targets));

            SelectionParams sp;
            sp.epsilon = sel_eps.empty() ? cfg.epsilons.front() : parse_epsilon(sel_eps);
            sp.delta = sel_delta > 0.0 ? sel_delta : cfg.deltas.front();
            sp.k = sel_k ? sel_k : cfg.k;
            sp.rho = sel_rho > 0.0 ? sel_rho : cfg.rho;
            const double frac = sel_alpha_frac > 0.0 ? sel_alpha_frac : cfg.alpha_frac;
            sp.alpha = sel_alpha ? sel_alpha
                                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                                                frac * static_cast<double>(clients.size()))));
            sp.p_min = cfg.p_min;
            sp.laplace_kernel_scale = cfg.laplace_kernel_scale;
            sp.mechanism = sel_mech == "laplace" ? Mechanism::laplace : Mechanism::optimal;
            if (!sel_truth.empty()) sp.truth = load_prior(sel_truth, ls.size());
            Rng rng(cfg.seed);
            auto res = run_selection(clients, ls, targets, sp, rng);

            json j;
            j["epsilon"] = sp.epsilon;
            j["delta"] = sp.delta;
            j["k"] = sp.k;
            j["alpha"] = sp.alpha;
            j["rho"] = sp.rho;
            j["mechanism"] = sel_mech;
            j["targets"] = targets.ids();
            j["selected"] = res.selected;
            j["selected_group"] = res.selected_group;
            j["groups"] = json::array();
            for (const auto& gs : res.groups) j["groups"].push_back(group_json(gs));
            j["final_prior"] = std::vector<double>(res.final_prior.probs().begin(), res.final_prior.probs().end());
            if (sp.truth) j["kl_trajectory"] = res.kl_trajectory;
            const auto path = out_path(g, sel_report);
            std::ofstream(path) << j.dump(2) << '\n';
            std::cout << "selected=" << res.selected.size() << " of alpha=" << sp.alpha;
            if (traces.test_periods() > 0 && !res.selected.empty())
                std::cout << " coverage=" << evaluate_coverage(res.selected, traces, targets);
            std::cout << '\n';
        } else if (*ev) {
            auto ls = load_locations(ev_locations);
            auto traces = load_traces(ev_traces, ls, cfg);
            TargetSet targets(ls, parse_ids(ev_targets));
            auto selected = read_selected(ev_selected);
            std::cout << "coverage=" << evaluate_coverage(selected, traces, targets) << " selected=" << selected.size()
                      << '\n';
        } else if (*ex) {
            if (ex_trials) cfg.trials = ex_trials;
            if (!ex_eps.empty()) apply_config_entry(cfg, "epsilon", ex_eps);
            if (!ex_delta.empty()) apply_config_entry(cfg, "delta", ex_delta);
            if (!ex_nt.empty()) apply_config_entry(cfg, "n_targets", ex_nt);
            if (!ex_targets.empty()) apply_config_entry(cfg, "targets", ex_targets);
            if (!ex_methods.empty()) apply_config_entry(cfg, "methods", ex_methods);
            auto report = run_experiment(cfg);
            {
                std::ofstream csv(out_path(g, ex_csv));
                write_report_csv(report, csv);
            }
            {
                std::ofstream js(out_path(g, ex_json));
                write_report_json(report, js);
            }
            std::cout << std::fixed << std::setprecision(4);
            for (const auto& s : report.summaries) {
                std::cout << std::left << std::setw(8) << to_string(s.method) << " eps=" << format_epsilon(s.epsilon)
                          << " delta=" << s.delta << " targets=" << s.n_targets << " coverage=" << s.coverage_mean
                          << " +- " << s.coverage_stderr << " selected=" << s.selected_mean;
                if (s.failed) std::cout << " failed=" << s.failed;
                std::cout << '\n';
            }
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
