// Copyright 2026 The speclab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Report files and run validation for the experiment bench.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "speclab/experiment.hpp"

namespace speclab {

namespace {

using json = nlohmann::ordered_json;

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", x);
    return buf;
}

json cell_to_json(const CellStats& stats) {
    json depth = json::object();
    for (const auto& [d, cell] : stats.depth) {
        depth[std::to_string(d)] = {{"accepted", cell.accepted}, {"total", cell.total}};
    }
    json entropy = {
        {"accepted", stats.entropy.accepted},
        {"rejected", stats.entropy.rejected},
        {"accepted_draft_sum", stats.entropy.accepted_draft_sum},
        {"rejected_draft_sum", stats.entropy.rejected_draft_sum},
        {"accepted_verifier_sum", stats.entropy.accepted_verifier_sum},
        {"rejected_verifier_sum", stats.entropy.rejected_verifier_sum},
    };
    return {
        {"calls", stats.calls},
        {"accepted_tokens", stats.accepted_tokens},
        {"committed_tokens", stats.committed_tokens},
        {"mean_acceptance", stats.mean_acceptance()},
        {"depth", depth},
        {"entropy", entropy},
    };
}

}  // namespace

void write_reports(const ExperimentRun& run, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    json report;
    report["config"] = json::parse(config_to_json(run.config));
    report["seeds"] = json::array();
    // (strategy, mode, domain) -> per-seed means, for the aggregate block.
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> means;
    std::map<std::pair<std::string, std::string>, std::vector<double>> match_rates;

    for (const SeedOutcome& seed : run.seeds) {
        json cells = json::array();
        for (const auto& [key, stats] : seed.cells) {
            const auto& [strategy, mode, domain] = key;
            json cell = cell_to_json(stats);
            cell["strategy"] = strategy;
            cell["mode"] = mode;
            cell["domain"] = domain;
            cells.push_back(std::move(cell));
            means[key].push_back(stats.mean_acceptance());
        }
        json routing = json::array();
        for (const auto& [key, tally] : seed.routing) {
            const auto& [signal, domain] = key;
            json picks = json::object();
            for (const auto& [label, n] : tally.prompt_picks) {
                picks[label] = n;
            }
            json call_picks = json::object();
            for (const auto& [label, n] : tally.call_picks) {
                call_picks[label] = n;
            }
            const std::uint64_t matched =
                tally.prompt_picks.count(domain) ? tally.prompt_picks.at(domain) : 0;
            const double rate = tally.prompts == 0
                                    ? 0.0
                                    : static_cast<double>(matched) /
                                          static_cast<double>(tally.prompts);
            routing.push_back({
                {"signal", signal},
                {"domain", domain},
                {"prompts", tally.prompts},
                {"prompt_picks", picks},
                {"matched_rate", rate},
                {"calls", tally.calls},
                {"call_picks", call_picks},
            });
            match_rates[key].push_back(rate);
        }
        json sweep = json::array();
        for (const SweepPoint& p : seed.sweep) {
            sweep.push_back({
                {"lambda", p.lambda},
                {"mean_a", p.mean_a},
                {"mean_b", p.mean_b},
                {"mean_mixed", p.mean_mixed},
                {"calls_a", p.calls_a},
                {"calls_b", p.calls_b},
                {"accepted_a", p.accepted_a},
                {"accepted_b", p.accepted_b},
            });
        }
        report["seeds"].push_back({
            {"seed", seed.seed},
            {"cells", std::move(cells)},
            {"routing", std::move(routing)},
            {"sweep", std::move(sweep)},
        });
    }

    json aggregates = json::array();
    for (const auto& [key, values] : means) {
        const auto& [strategy, mode, domain] = key;
        double sum = 0.0, lo = values.front(), hi = values.front();
        for (double v : values) {
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        aggregates.push_back({
            {"strategy", strategy},
            {"mode", mode},
            {"domain", domain},
            {"seeds", values.size()},
            {"mean_acceptance", sum / static_cast<double>(values.size())},
            {"min", lo},
            {"max", hi},
        });
    }
    report["aggregates"] = std::move(aggregates);

    json routing_aggregates = json::array();
    for (const auto& [key, values] : match_rates) {
        double sum = 0.0;
        for (double v : values) {
            sum += v;
        }
        routing_aggregates.push_back({
            {"signal", key.first},
            {"domain", key.second},
            {"seeds", values.size()},
            {"matched_rate", sum / static_cast<double>(values.size())},
        });
    }
    report["routing_aggregates"] = std::move(routing_aggregates);

    std::ofstream json_out(fs::path(out_dir) / "report.json", std::ios::binary);
    json_out << report.dump(2) << "\n";

    std::ofstream metrics(fs::path(out_dir) / "metrics.csv", std::ios::binary);
    metrics << "seed,strategy,mode,domain,calls,accepted_tokens,committed_tokens,"
               "mean_acceptance\n";
    for (const SeedOutcome& seed : run.seeds) {
        for (const auto& [key, stats] : seed.cells) {
            const auto& [strategy, mode, domain] = key;
            metrics << seed.seed << ',' << strategy << ',' << mode << ',' << domain << ','
                    << stats.calls << ',' << stats.accepted_tokens << ','
                    << stats.committed_tokens << ',' << fmt_double(stats.mean_acceptance())
                    << '\n';
        }
    }

    std::ofstream routing_csv(fs::path(out_dir) / "routing_records.csv", std::ios::binary);
    routing_csv << "seed,domain,signal,chosen,score_1,score_2\n";
    for (const SeedOutcome& seed : run.seeds) {
        for (const auto& [key, tally] : seed.routing) {
            for (const RoutingRecord& rec : tally.first_call_records) {
                routing_csv << seed.seed << ',' << routing_record_csv_row(rec) << '\n';
            }
        }
    }

    std::ofstream sweep_csv(fs::path(out_dir) / "sweep.csv", std::ios::binary);
    sweep_csv << "seed,lambda,mean_a,mean_b,mean_mixed,calls_a,calls_b,accepted_a,accepted_b\n";
    for (const SeedOutcome& seed : run.seeds) {
        for (const SweepPoint& p : seed.sweep) {
            sweep_csv << seed.seed << ',' << fmt_double(p.lambda) << ',' << fmt_double(p.mean_a)
                      << ',' << fmt_double(p.mean_b) << ',' << fmt_double(p.mean_mixed) << ','
                      << p.calls_a << ',' << p.calls_b << ',' << p.accepted_a << ','
                      << p.accepted_b << '\n';
        }
    }
}

std::optional<std::string> validate_run(const ExperimentRun& run) {
    try {
        validate_config(run.config);
    } catch (const std::exception& e) {
        return std::string("config: ") + e.what();
    }
    if (run.seeds.size() != run.config.seeds.size()) {
        return "seed count does not match the config";
    }
    const double max_mean = static_cast<double>(run.config.tree.total_nodes);
    for (std::size_t i = 0; i < run.seeds.size(); ++i) {
        const SeedOutcome& seed = run.seeds[i];
        if (seed.seed != run.config.seeds[i]) {
            return "seed order does not match the config";
        }
        for (const auto& [key, stats] : seed.cells) {
            const auto& [strategy, mode, domain] = key;
            const std::string where = strategy + "/" + mode + "/" + domain;
            if (stats.calls == 0) {
                return "cell with no calls: " + where;
            }
            if (stats.committed_tokens != stats.accepted_tokens + stats.calls) {
                return "committed != accepted + calls in " + where;
            }
            const double mean = stats.mean_acceptance();
            if (!(mean >= 0.0 && mean <= max_mean)) {
                return "mean acceptance out of range in " + where;
            }
            std::uint64_t records = 0;
            std::uint64_t accepted_records = 0;
            for (const auto& [depth, cell] : stats.depth) {
                if (depth < 1 || depth > run.config.tree.max_depth) {
                    return "depth out of range in " + where;
                }
                if (cell.accepted > cell.total) {
                    return "depth cell accepted > total in " + where;
                }
                records += cell.total;
                accepted_records += cell.accepted;
            }
            if (accepted_records != stats.accepted_tokens) {
                return "accepted records != accepted tokens in " + where;
            }
            if (stats.entropy.accepted + stats.entropy.rejected != records) {
                return "entropy record count mismatch in " + where;
            }
        }
        for (const auto& [key, tally] : seed.routing) {
            const std::string where = key.first + "/" + key.second;
            if (tally.prompts !=
                static_cast<std::uint64_t>(run.config.eval_prompts_per_domain)) {
                return "routing prompt count mismatch in " + where;
            }
            std::uint64_t picks = 0;
            for (const auto& [label, n] : tally.prompt_picks) {
                picks += n;
            }
            if (picks != tally.prompts) {
                return "prompt picks do not sum to prompts in " + where;
            }
            std::uint64_t call_picks = 0;
            for (const auto& [label, n] : tally.call_picks) {
                call_picks += n;
            }
            if (call_picks != tally.calls || tally.calls < tally.prompts) {
                return "call picks inconsistent in " + where;
            }
            if (tally.first_call_records.size() != tally.prompts) {
                return "first call record count mismatch in " + where;
            }
            for (const RoutingRecord& rec : tally.first_call_records) {
                if (rec.prompt_domain != key.second ||
                    std::string(routing_signal_name(rec.signal)) != key.first) {
                    return "routing record labels inconsistent in " + where;
                }
            }
        }
        if (!seed.sweep.empty()) {
            if (seed.sweep.size() != run.config.lambda_grid.size()) {
                return "sweep point count mismatch";
            }
            for (std::size_t l = 0; l < seed.sweep.size(); ++l) {
                const SweepPoint& p = seed.sweep[l];
                if (p.lambda != run.config.lambda_grid[l]) {
                    return "sweep lambda order mismatch";
                }
                if (p.calls_a == 0 || p.calls_b == 0) {
                    return "sweep point with no calls";
                }
                auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12; };
                if (!close(p.mean_a,
                           static_cast<double>(p.accepted_a) / static_cast<double>(p.calls_a)) ||
                    !close(p.mean_b,
                           static_cast<double>(p.accepted_b) / static_cast<double>(p.calls_b)) ||
                    !close(p.mean_mixed, static_cast<double>(p.accepted_a + p.accepted_b) /
                                             static_cast<double>(p.calls_a + p.calls_b))) {
                    return "sweep means inconsistent with counts";
                }
            }
        }
    }
    return std::nullopt;
}

}  // namespace speclab
