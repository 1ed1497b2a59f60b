#include "agesl/metrics.hpp"
#include "agesl/embeddings.hpp"
#include "agesl/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace agesl::metrics {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> p) {
    if (a.size() != p.size() || a.empty()) {
        throw Error(ErrorKind::Range, "metrics: actuals and predictions must be nonempty and equally long");
    }
}

}  // namespace

double rmse(std::span<const double> actuals, std::span<const double> predictions) {
    check_lengths(actuals, predictions);
    double s = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) s += (actuals[i] - predictions[i]) * (actuals[i] - predictions[i]);
    return std::sqrt(s / static_cast<double>(actuals.size()));
}

double mape(std::span<const double> actuals, std::span<const double> predictions) {
    check_lengths(actuals, predictions);
    double s = 0.0;
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        if (actuals[i] == 0.0) throw Error(ErrorKind::Range, "mape: actual value is zero at index " + std::to_string(i));
        s += std::abs((actuals[i] - predictions[i]) / actuals[i]);
    }
    return s / static_cast<double>(actuals.size());
}

double direction_statistic(std::span<const double> actuals, std::span<const double> predictions, DirectionRule rule) {
    check_lengths(actuals, predictions);
    if (actuals.size() < 2) return 0.0;
    std::size_t hits = 0;
    for (std::size_t t = 0; t + 1 < actuals.size(); ++t) {
        const double move = actuals[t + 1] - actuals[t];
        const double other = rule == DirectionRule::AsWritten ? actuals[t + 1] - predictions[t + 1]
                                                              : predictions[t + 1] - actuals[t];
        if (move * other >= 0.0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(actuals.size() - 1);
}

EvalReport point_metrics(std::span<const double> actuals, std::span<const double> predictions, DirectionRule rule) {
    return {rmse(actuals, predictions), mape(actuals, predictions), direction_statistic(actuals, predictions, rule),
            actuals.size()};
}

stats::TestReport dm_test(std::span<const double> losses_a, std::span<const double> losses_b, int horizon) {
    if (losses_a.size() != losses_b.size()) throw Error(ErrorKind::Range, "dm_test: loss sequences differ in length");
    if (losses_a.size() < 10) throw Error(ErrorKind::InsufficientData, "dm_test: need at least 10 losses");
    if (horizon < 1) throw Error(ErrorKind::Range, "dm_test: horizon must be at least 1");
    const std::size_t n = losses_a.size();
    std::vector<double> d(n);
    bool all_equal = true;
    for (std::size_t t = 0; t < n; ++t) {
        d[t] = losses_a[t] - losses_b[t];
        if (!std::isfinite(d[t])) throw Error(ErrorKind::NonFinite, "dm_test: non-finite loss at index " + std::to_string(t));
        all_equal = all_equal && d[t] == 0.0;
    }
    if (all_equal) return stats::make_report(0.0, 1.0, horizon - 1);
    const double dbar = stats::mean(d);
    const auto gamma = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = k; t < n; ++t) s += (d[t] - dbar) * (d[t - k] - dbar);
        return s / static_cast<double>(n);
    };
    const double g0 = gamma(0);
    if (g0 <= 1e-24 * dbar * dbar) {
        throw Error(ErrorKind::Degenerate, "dm_test: loss differential is constant and nonzero; the statistic is undefined");
    }
    double lrv = g0;
    for (int k = 1; k < horizon && static_cast<std::size_t>(k) < n; ++k) lrv += 2.0 * gamma(static_cast<std::size_t>(k));
    if (lrv <= 0.0) lrv = g0;
    const double stat = dbar / std::sqrt(lrv / static_cast<double>(n));
    return stats::make_report(stat, stats::normal_two_sided_p(stat), horizon - 1);
}

SchemaScores scores_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    SchemaScores s;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    return s;
}

SchemaScores schema_match_eval(std::span<const SchemaCluster> predicted, std::span<const SchemaCluster> gold) {
    std::map<std::string, std::vector<const SchemaEvent*>> gold_by_cluster;
    std::size_t gold_total = 0;
    for (const auto& c : gold) {
        for (const auto& e : c.events) gold_by_cluster[c.cluster].push_back(&e);
        gold_total += c.events.size();
    }
    std::size_t tp = 0, pred_total = 0;
    std::map<std::string, std::set<std::size_t>> used;
    for (const auto& c : predicted) {
        pred_total += c.events.size();
        const auto it = gold_by_cluster.find(c.cluster);
        if (it == gold_by_cluster.end()) continue;
        auto& taken = used[c.cluster];
        for (const auto& p : c.events) {
            std::set<std::string> pargs;
            for (const auto& a : p.arguments) pargs.insert(text::ascii_lower(a));
            const std::string ptrig = text::ascii_lower(p.trigger);
            std::size_t best = it->second.size();
            double best_overlap = -1.0;
            for (std::size_t g = 0; g < it->second.size(); ++g) {
                if (taken.contains(g) || text::ascii_lower(it->second[g]->trigger) != ptrig) continue;
                const auto& gargs = it->second[g]->arguments;
                std::size_t common = 0;
                for (const auto& a : gargs) common += pargs.contains(text::ascii_lower(a)) ? 1 : 0;
                const double overlap = gargs.empty() ? 1.0 : static_cast<double>(common) / static_cast<double>(gargs.size());
                if (overlap > best_overlap) {
                    best_overlap = overlap;
                    best = g;
                }
            }
            if (best < it->second.size()) {
                taken.insert(best);
                ++tp;
            }
        }
    }
    return scores_from_counts(tp, pred_total - tp, gold_total - tp);
}

std::vector<SchemaCluster> read_schema_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open schema file " + path.string());
    std::vector<SchemaCluster> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            SchemaCluster c;
            c.cluster = j.at("cluster").get<std::string>();
            for (const auto& e : j.at("events")) {
                c.events.push_back({e.at("trigger").get<std::string>(),
                                    e.value("arguments", std::vector<std::string>{})});
            }
            out.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace agesl::metrics
