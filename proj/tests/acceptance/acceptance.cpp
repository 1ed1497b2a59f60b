// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failed criteria.

#include "agesl/arima.hpp"
#include "agesl/error.hpp"
#include "agesl/events.hpp"
#include "agesl/experiment.hpp"
#include "agesl/garch.hpp"
#include "agesl/metrics.hpp"
#include "agesl/neural.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace agesl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome arima_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const double alpha = 0.6, theta = 0.3;
    int hits = 0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        const auto w = arima::simulate(0.0, std::vector<double>{alpha}, std::vector<double>{theta}, 1.0, 1000, rng);
        std::vector<double> level(w.size());
        double x = 50.0;
        for (std::size_t i = 0; i < w.size(); ++i) level[i] = x += w[i];
        const auto m = arima::fit(level, {1, 1, 1});
        const double za = std::abs(m.ar[0] - alpha) / m.std_errors[1];
        const double zt = std::abs(m.ma[0] - theta) / m.std_errors[2];
        const bool ok = za < 2.0 && zt < 2.0;
        hits += ok ? 1 : 0;
        per_seed += fmt(" %.2f/%.2f", za, zt);
    }
    const double secs = seconds_since(t0);
    return {hits >= 4 && secs < 30.0,
            fmt("%d/5 seeds within 2 SE (|err|/SE ar/ma:%s), %.2f s", hits, per_seed.c_str(), secs)};
}

Outcome garch_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> a0, a1, b1;
    bool constraints = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed);
        const auto r = garch::simulate(0.1, std::vector<double>{0.15}, std::vector<double>{0.80}, 5000, rng);
        const auto m = garch::fit(r);
        constraints = constraints && m.alpha0 > 0.0 && m.alpha[0] >= 0.0 && m.beta[0] >= 0.0 && m.persistence() < 1.0;
        a0.push_back(m.alpha0);
        a1.push_back(m.alpha[0]);
        b1.push_back(m.beta[0]);
    }
    const double secs = seconds_since(t0);
    const double ma1 = median(a1), mb1 = median(b1);
    const bool ok = std::abs(ma1 - 0.15) <= 0.05 && std::abs(mb1 - 0.80) <= 0.08 && constraints && secs < 60.0;
    return {ok, fmt("median alpha0 %.4f alpha1 %.4f (|err| %.4f <= 0.05) beta1 %.4f (|err| %.4f <= 0.08), constraints %s, %.2f s",
                    median(a0), ma1, std::abs(ma1 - 0.15), mb1, std::abs(mb1 - 0.80), constraints ? "hold" : "VIOLATED", secs)};
}

Outcome garch_forecast() {
    garch::GarchModel m;
    m.alpha0 = 0.1;
    m.alpha = {0.2};
    m.beta = {0.7};
    const double next = garch::forecast_variance(m, 1.0, 1.0, 1)[0];
    const auto path = garch::forecast_variance(m, 9.0, 0.05, 200);
    const double target = m.alpha0 / (1.0 - m.alpha[0] - m.beta[0]);
    const double gap = std::abs(path.back() - target);
    return {next == 1.0 && gap < 1e-6, fmt("one-step %.17g (exact 1.0 required), |h200 - %.6g| = %.3g", next, target, gap)};
}

Outcome sentiment_oracle() {
    std::ifstream in(fs::path(AGESL_FIXTURE_DIR) / "sentiment_200.tsv");
    if (!in) return {false, "fixture missing"};
    std::string line;
    std::getline(in, line);
    const auto& lex = sentiment::SentimentLexicon::bundled();
    double worst = 0.0, worst_sum = 0.0;
    int n = 0;
    while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string text, cell;
        std::getline(f, text, '\t');
        for (int k = 0; k < 4; ++k) std::getline(f, cell, '\t');
        const auto s = sentiment::score_text(text, lex);
        worst = std::max(worst, std::abs(s.compound - std::stod(cell)));
        const double sum = s.neg + s.neu + s.pos;
        if (text.find_first_not_of(" \t") == std::string::npos) {
            worst_sum = std::max(worst_sum, std::abs(sum));
        } else {
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
        ++n;
    }
    const auto row1 = sentiment::score_text(
        "Crude oil on the New York Mercantile Exchange dropped to $54.40 during early afternoon trading, marking a "
        "fifth day of lower oil prices.",
        lex);
    const double d_neg = std::abs(row1.neg - 0.22), d_neu = std::abs(row1.neu - 0.78), d_pos = std::abs(row1.pos - 0.00);
    const bool ok = n == 200 && worst <= 0.05 && worst_sum <= 1e-6 && d_neg <= 0.02 && d_neu <= 0.02 && d_pos <= 0.02;
    return {ok, fmt("%d sentences, max |d compound| %.4f, max sum deviation %.2g (1 for text, 0 for empty), news row neg %.3f neu %.3f pos %.3f", n, worst,
                    worst_sum, row1.neg, row1.neu, row1.pos)};
}

/// Largest per-entry relative error |a - n| / max(|a|, |n|) against a
/// five-point central difference; entries whose analytic and numeric values
/// are both below `floor` are skipped.
double max_rel_error(const Eigen::VectorXd& analytic, const std::function<double(Eigen::Index, double)>& loss_at, double h,
                     double floor = 1e-8) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        const double numeric = (loss_at(i, -2 * h) - 8 * loss_at(i, -h) + 8 * loss_at(i, h) - loss_at(i, 2 * h)) / (12 * h);
        const double scale = std::max(std::abs(analytic[i]), std::abs(numeric));
        if (scale < floor) continue;
        worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
    }
    return worst;
}

Outcome gradient_checks() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_lstm = 0.0, worst_mlp = 0.0;
    for (std::uint64_t point = 0; point < 20; ++point) {
        std::mt19937_64 rng(1000 + point);
        std::normal_distribution<double> z;
        const int I = 6, H = 5, T = 4, B = 4;
        nn::LstmRegressor lstm(I, H, 2000 + point);
        for (Eigen::Index i = 0; i < lstm.params().size(); ++i) lstm.params_mut()[i] += 0.3 * z(rng);
        std::vector<nn::Mat> seqs;
        std::vector<double> targets;
        for (int b = 0; b < B; ++b) {
            seqs.push_back(nn::Mat::NullaryExpr(I, T, [&] { return z(rng); }));
            targets.push_back(z(rng));
        }
        const auto g = nn::lstm_batch_gradient_serial(lstm, seqs, targets);
        worst_lstm = std::max(worst_lstm, max_rel_error(g.grad, [&](Eigen::Index i, double d) {
            auto m = lstm;
            m.params_mut()[i] += d;
            return nn::lstm_batch_gradient_serial(m, seqs, targets).loss;
        }, 1e-4));

        nn::MlpHead mlp({7, 16, 1}, 3000 + point);
        for (Eigen::Index i = 0; i < mlp.params().size(); ++i) mlp.params_mut()[i] += 0.3 * z(rng);
        const nn::Mat x = nn::Mat::NullaryExpr(7, 8, [&] { return z(rng); });
        const nn::Vec y = nn::Vec::NullaryExpr(8, [&] { return z(rng); });
        const auto loss = [&](const nn::MlpHead& h) { return nn::mse(h.forward(x).output.row(0).transpose(), y); };
        const auto cache = mlp.forward(x);
        const auto lg = loss(mlp);
        const auto mg = mlp.backward(cache, lg.grad.transpose());
        worst_mlp = std::max(worst_mlp, max_rel_error(mg.params, [&](Eigen::Index i, double d) {
            auto m = mlp;
            m.params_mut()[i] += d;
            return loss(m).loss;
        }, 1e-4));
    }
    const double secs = seconds_since(t0);
    return {worst_lstm < 1e-4 && worst_mlp < 1e-4 && secs < 10.0,
            fmt("20 points, max relative error LSTM %.2e MLP %.2e (< 1e-4), %.2f s", worst_lstm, worst_mlp, secs)};
}

Outcome odee_sanity() {
    const auto corpus = synthetic::generate_odee_corpus({}, 11);
    events::OdeeConfig config;
    config.num_slots = 3;
    config.epochs = 40;
    config.seed = 3;
    const auto p = events::train(corpus.clusters, config);
    const auto& h = p.elbo_history;
    bool smooth_ok = true;
    double worst_drop = 0.0;
    for (std::size_t w = 1; w * 5 + 5 <= h.size(); ++w) {
        double prev = 0.0, cur = 0.0;
        for (std::size_t e = 0; e < 5; ++e) {
            prev += h[(w - 1) * 5 + e] / 5.0;
            cur += h[w * 5 + e] / 5.0;
        }
        worst_drop = std::max(worst_drop, prev - cur);
        smooth_ok = smooth_ok && cur >= prev - 1e-3;
    }
    std::map<std::pair<int, int>, int> counts;
    int total = 0;
    for (std::size_t c = 0; c < corpus.clusters.size(); ++c) {
        const auto& cl = corpus.clusters[c];
        const auto slots = events::assign_slots(p, cl, events::infer_type(p, cl));
        for (std::size_t e = 0; e < slots.size(); ++e, ++total) ++counts[{slots[e], corpus.true_slots[c][e]}];
    }
    std::map<int, int> best;
    for (const auto& [k, n] : counts) best[k.first] = std::max(best[k.first], n);
    int hit = 0;
    for (const auto& [s, n] : best) hit += n;
    const double purity = static_cast<double>(hit) / total;

    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> kpick(1, 12);
    std::normal_distribution<double> z(0.0, 3.0);
    std::uniform_real_distribution<double> scale(1e-6, 1e6);
    int invariant = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = kpick(rng);
        std::vector<double> a(k), b(k), c(k);
        for (int s = 0; s < k; ++s) a[s] = z(rng), b[s] = z(rng), c[s] = z(rng);
        const int base = events::argmax_slot(a, b, c);
        const double log_k = std::log(scale(rng));
        for (int s = 0; s < k; ++s) a[s] += log_k;
        invariant += events::argmax_slot(a, b, c) == base ? 1 : 0;
    }
    return {smooth_ok && purity >= 0.8 && invariant == 1000,
            fmt("K=3, %zu clusters: 5-epoch ELBO means %s (largest drop %.2e), purity %.3f (>= 0.8), argmax invariant %d/1000",
                corpus.clusters.size(), smooth_ok ? "nondecreasing" : "DECREASE", worst_drop, purity, invariant)};
}

std::pair<double, double> brute_dm(const std::vector<double>& la, const std::vector<double>& lb, int h) {
    const std::size_t n = la.size();
    std::vector<double> d(n);
    double dbar = 0.0;
    for (std::size_t t = 0; t < n; ++t) dbar += (d[t] = la[t] - lb[t]) / static_cast<double>(n);
    double v = 0.0;
    for (int k = 0; k < h; ++k) {
        double g = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) g += (d[t] - dbar) * (d[t - static_cast<std::size_t>(k)] - dbar);
        g /= static_cast<double>(n);
        v += k == 0 ? g : 2 * g;
    }
    if (v <= 0.0) {
        v = 0.0;
        for (std::size_t t = 0; t < n; ++t) v += (d[t] - dbar) * (d[t] - dbar) / static_cast<double>(n);
    }
    const double stat = dbar / std::sqrt(v / static_cast<double>(n));
    return {stat, std::erfc(std::abs(stat) / std::sqrt(2.0))};
}

Outcome metrics_oracle() {
    std::mt19937_64 rng(2718);
    std::uniform_int_distribution<int> len(10, 200);
    std::uniform_int_distribution<int> hpick(1, 4);
    std::normal_distribution<double> z;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = len(rng);
        std::vector<double> y(n), p(n), q(n);
        for (int i = 0; i < n; ++i) {
            y[i] = 60.0 + 8.0 * z(rng);
            p[i] = y[i] + z(rng);
            q[i] = y[i] + 1.3 * z(rng);
        }
        double se = 0.0, ape = 0.0;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            se += (y[i] - p[i]) * (y[i] - p[i]);
            ape += std::abs(y[i] - p[i]) / std::abs(y[i]);
        }
        for (int t = 0; t + 1 < n; ++t) hits += (y[t + 1] - y[t]) * (y[t + 1] - p[t + 1]) >= 0 ? 1 : 0;
        const auto r = metrics::point_metrics(y, p);
        worst = std::max({worst, std::abs(r.rmse - std::sqrt(se / n)), std::abs(r.mape - ape / n),
                          std::abs(r.ds - static_cast<double>(hits) / (n - 1))});
        std::vector<double> la(n), lb(n);
        for (int i = 0; i < n; ++i) la[i] = (y[i] - p[i]) * (y[i] - p[i]), lb[i] = (y[i] - q[i]) * (y[i] - q[i]);
        const int h = hpick(rng);
        const auto dm = metrics::dm_test(la, lb, h);
        const auto [bs, bp] = brute_dm(la, lb, h);
        worst = std::max({worst, std::abs(dm.statistic - bs), std::abs(dm.p_value - bp)});
    }
    std::vector<double> l(50);
    for (auto& x : l) x = z(rng) * z(rng);
    const auto self = metrics::dm_test(l, l, 1);
    const bool ok = worst <= 1e-10 && self.statistic == 0.0 && self.p_value == 1.0;
    return {ok, fmt("1000 random cases, max |difference| vs brute force %.2e (<= 1e-10), DM(self) = %g with p = %g", worst,
                    self.statistic, self.p_value)};
}

fs::path synthetic_config() { return fs::path(AGESL_DATA_DIR) / "synthetic" / "experiment.json"; }

Outcome end_to_end() {
    const auto t0 = std::chrono::steady_clock::now();
    auto config = pipeline::ExperimentConfig::load(synthetic_config());
    config.output_dir = fs::current_path() / "acceptance_out";
    config.verbose = false;
    const auto r = pipeline::run_experiment(config);
    pipeline::write_outputs(r, config.output_dir);
    const double secs = seconds_since(t0);
    std::map<std::string, double> med;
    for (const auto& s : r.summaries) med[s.model] = s.ok_runs == 5 ? s.median.rmse : NAN;
    const double agesl = med["AGESL"], event = med["LSTM-Event"], lstm = med["LSTM"], arima = med["ARIMA"];
    const double gain = 1.0 - agesl / arima;
    const bool ordered = agesl < event && event < lstm && lstm < arima;
    const bool ok = ordered && gain >= 0.10 && secs < 15 * 60.0;
    return {ok, fmt("median RMSE AGESL %.4f < LSTM-Event %.4f < LSTM %.4f < ARIMA %.4f: %s, AGESL gain %.1f%% (>= 10%%), %.0f s",
                    agesl, event, lstm, arima, ordered ? "yes" : "NO", 100 * gain, secs)};
}

Outcome fusion_identity() {
    auto config = pipeline::ExperimentConfig::load(synthetic_config());
    config.output_dir = fs::current_path() / "acceptance_identity";
    config.models = {"ARIMA", "AGESL"};
    config.agesl_init = pipeline::AgeslInit::Arima;
    config.fusion.epochs = 0;
    config.lstm.epochs = 0;
    config.odee.epochs = 1;
    config.seeds = {1};
    config.verbose = false;
    const auto r = pipeline::run_experiment(config);
    const auto* a = r.summary("ARIMA");
    const auto* g = r.summary("AGESL");
    if (!a || !g || g->ok_runs != 1) return {false, "AGESL run failed"};
    double worst_ulps = 0.0;
    for (std::size_t i = 0; i < a->mean_predictions.size(); ++i) {
        const double x = a->mean_predictions[i], y = g->mean_predictions[i];
        worst_ulps = std::max(worst_ulps, std::abs(x - y) / (std::abs(x) * DBL_EPSILON));
    }
    return {worst_ulps <= 8.0,
            fmt("%zu test days, max deviation %.1f ulp of the ARIMA forecast (<= 8)", a->mean_predictions.size(), worst_ulps)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"ARIMA parameter recovery", arima_recovery},
        {"GARCH parameter recovery", garch_recovery},
        {"GARCH forecast arithmetic", garch_forecast},
        {"Sentiment oracle match", sentiment_oracle},
        {"LSTM/MLP gradient checks", gradient_checks},
        {"ODEE training sanity", odee_sanity},
        {"Metrics oracle equivalence", metrics_oracle},
        {"End-to-end relative ordering", end_to_end},
        {"Fusion identity", fusion_identity},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
