#include "agesl/arima.hpp"
#include "agesl/error.hpp"
#include "agesl/events.hpp"
#include "agesl/experiment.hpp"
#include "agesl/garch.hpp"
#include "agesl/metrics.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace agesl;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

pipeline::ExperimentConfig load(const Common& c) {
    auto cfg = pipeline::ExperimentConfig::load(c.config);
    if (c.seed) cfg.seeds = {*c.seed};
    if (!c.out.empty()) cfg.output_dir = c.out;
    return cfg;
}

std::uint64_t seed_of(const pipeline::ExperimentConfig& cfg) { return cfg.seeds.front(); }

std::ofstream open_out(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / name).string());
    return out;
}

std::string num(double x) {
    if (!std::isfinite(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

json finite(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json run_ingest(const Common& c) {
    const auto cfg = load(c);
    const auto d = pipeline::load_inputs(cfg);
    auto out = open_out(cfg.output_dir, "prices_clean.csv");
    out << "date,close\n";
    for (std::size_t i = 0; i < d.prices.size(); ++i) out << d.prices.dates()[i].iso() << ',' << num(d.prices.values()[i]) << '\n';
    json reps = json::array();
    for (const auto& r : d.replacements) {
        reps.push_back({{"date", r.date.iso()}, {"original", r.original}, {"replacement", r.replacement}});
    }
    std::size_t clusters = 0;
    for (const auto& cl : d.clusters) clusters += cl.has_value();
    return {{"trading_days", d.prices.size()},
            {"replacements", reps},
            {"rejected_rows", d.rejected_rows},
            {"news_days", d.sentiments.size()},
            {"annotated_clusters", clusters},
            {"dropped_news", d.dropped_news},
            {"split", {{"train_end", d.split.train_end}, {"val_end", d.split.val_end}, {"test_end", d.split.test_end}}}};
}

json run_fit_arima(const Common& c) {
    const auto cfg = load(c);
    auto d = pipeline::load_inputs(cfg);
    pipeline::fit_mean_model(d, cfg);
    open_out(cfg.output_dir, "arima.json") << arima::to_json(d.arima).dump(2) << '\n';
    auto out = open_out(cfg.output_dir, "arima_forecasts.csv");
    out << "date,close,arima_mean\n";
    for (std::size_t i = 0; i < d.prices.size(); ++i) {
        out << d.prices.dates()[i].iso() << ',' << num(d.prices.values()[i]) << ',' << num(d.arima_mean[i]) << '\n';
    }
    const auto& m = d.arima;
    const auto box = ts::box_pierce(std::span(m.residuals).subspan(static_cast<std::size_t>(m.spec.p)), 10,
                                    {.fitted_params = m.spec.p + m.spec.q});
    return {{"spec", {{"p", m.spec.p}, {"d", m.spec.d}, {"q", m.spec.q}}},
            {"intercept", m.intercept},
            {"ar", m.ar},
            {"ma", m.ma},
            {"sigma2", m.sigma2},
            {"bic", m.bic},
            {"box_pierce", {{"statistic", box.statistic}, {"p_value", box.p_value}}}};
}

json run_fit_garch(const Common& c) {
    const auto cfg = load(c);
    const auto d = pipeline::prepare(cfg);
    open_out(cfg.output_dir, "garch.json") << garch::to_json(d.garch).dump(2) << '\n';
    std::vector<double> resid;
    for (std::size_t t = d.garch_offset; t < d.split.train_end; ++t) resid.push_back(d.prices.values()[t] - d.arima_mean[t]);
    const auto lm = garch::lm_arch_test(resid, 5);
    auto out = open_out(cfg.output_dir, "garch_variance.csv");
    out << "date,residual,variance\n";
    for (std::size_t t = d.garch_offset; t < d.prices.size(); ++t) {
        out << d.prices.dates()[t].iso() << ',' << num(d.prices.values()[t] - d.arima_mean[t]) << ',' << num(d.garch_var[t])
            << '\n';
    }
    return {{"alpha0", d.garch.alpha0},
            {"alpha", d.garch.alpha},
            {"beta", d.garch.beta},
            {"persistence", d.garch.persistence()},
            {"lm_arch", {{"statistic", lm.statistic}, {"p_value", lm.p_value}, {"reject_at_5pct", lm.reject_at_5pct}}}};
}

json run_score_sentiment(const Common& c) {
    const auto cfg = load(c);
    const auto d = pipeline::load_inputs(cfg);
    auto out = open_out(cfg.output_dir, "sentiment.csv");
    out << "date,neg,neu,pos,compound\n";
    for (const auto& [date, s] : d.sentiments) {
        out << date.iso() << ',' << num(s.neg) << ',' << num(s.neu) << ',' << num(s.pos) << ',' << num(s.compound) << '\n';
    }
    return {{"days", d.sentiments.size()}, {"file", (cfg.output_dir / "sentiment.csv").string()}};
}

json run_extract_events(const Common& c) {
    const auto cfg = load(c);
    const auto d = pipeline::load_inputs(cfg);
    const auto stage = pipeline::extract_events(d, cfg, seed_of(cfg));
    open_out(cfg.output_dir, "odee.json") << events::to_json(stage.params).dump() << '\n';
    auto out = open_out(cfg.output_dir, "events.jsonl");
    for (const auto& [date, rec] : stage.records) {
        json evs = json::array();
        for (const auto& e : rec.events) {
            if (e.padding) continue;
            evs.push_back({{"trigger", e.trigger}, {"arguments", e.arguments}, {"tokens", e.tokens}, {"score", e.score}});
        }
        out << json{{"date", date.iso()}, {"num_extracted", rec.num_extracted}, {"events", evs}}.dump() << '\n';
    }
    return {{"clusters", stage.records.size()},
            {"elbo_history", stage.params.elbo_history},
            {"vocab", stage.params.vocab.size()},
            {"seed", seed_of(cfg)}};
}

json summary_json(const pipeline::ExperimentResult& r) {
    json j;
    for (const auto& s : r.summaries) {
        j[s.model] = {{"runs", s.ok_runs},
                      {"median_rmse", finite(s.median.rmse)},
                      {"mean_rmse", finite(s.mean.rmse)},
                      {"mean_mape", finite(s.mean.mape)},
                      {"mean_ds", finite(s.mean.ds)},
                      {"errors", s.errors}};
    }
    return {{"models", j}, {"seconds", r.seconds}};
}

json run_train(const Common& c) {
    const auto cfg = load(c);
    const auto d = pipeline::prepare(cfg);
    std::vector<pipeline::SeedResult> seeds{pipeline::run_seed(d, cfg, seed_of(cfg))};
    const auto r = pipeline::summarize(d, std::move(seeds), cfg.models);
    const auto dir = cfg.output_dir / ("seed-" + std::to_string(seed_of(cfg)));
    pipeline::write_outputs(r, dir);
    auto j = summary_json(r);
    j["output_dir"] = dir.string();
    return j;
}

json run_backtest(const Common& c) {
    const auto cfg = load(c);
    const auto r = pipeline::run_experiment(cfg);
    pipeline::write_outputs(r, cfg.output_dir);
    auto j = summary_json(r);
    j["output_dir"] = cfg.output_dir.string();
    return j;
}

struct PredictionTable {
    std::vector<std::string> columns;  // model names
    std::vector<double> actual;
    std::vector<std::vector<double>> values;  // per column
};

PredictionTable read_predictions(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open predictions " + path.string() + "; run backtest first");
    PredictionTable t;
    std::string line;
    std::getline(in, line);
    {
        std::istringstream hs(line);
        std::string cell;
        std::vector<std::string> cols;
        while (std::getline(hs, cell, ',')) cols.push_back(cell);
        if (cols.size() < 3 || cols[0] != "date" || cols[1] != "actual") {
            throw Error(ErrorKind::Parse, path.string() + ": expected header date,actual,<model>...");
        }
        t.columns.assign(cols.begin() + 2, cols.end());
        t.values.resize(t.columns.size());
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        std::getline(ls, cell, ',');
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(cell == "nan" ? NAN : std::stod(cell));
            } catch (const std::exception&) {
                throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.columns.size() + 1) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": wrong column count");
        }
        t.actual.push_back(row[0]);
        for (std::size_t k = 0; k < t.columns.size(); ++k) t.values[k].push_back(row[k + 1]);
    }
    return t;
}

std::size_t column(const PredictionTable& t, const std::string& model) {
    for (std::size_t k = 0; k < t.columns.size(); ++k) {
        if (t.columns[k] == model) return k;
    }
    throw Error(ErrorKind::Config, "no predictions for model '" + model + "'");
}

json run_evaluate(const Common& c, const std::string& predictions) {
    const auto cfg = load(c);
    const auto t = read_predictions(predictions.empty() ? cfg.output_dir / "predictions.csv" : fs::path(predictions));
    json j;
    for (std::size_t k = 0; k < t.columns.size(); ++k) {
        const auto r = metrics::point_metrics(t.actual, t.values[k], cfg.direction_rule);
        j[t.columns[k]] = {{"rmse", finite(r.rmse)}, {"mape", finite(r.mape)}, {"ds", finite(r.ds)}, {"n", r.n}};
    }
    return j;
}

json run_dm(const Common& c, const std::string& predictions, const std::string& a, const std::string& b, int horizon) {
    const auto cfg = load(c);
    const auto t = read_predictions(predictions.empty() ? cfg.output_dir / "predictions.csv" : fs::path(predictions));
    const auto losses = [&](std::size_t k) {
        std::vector<double> l;
        for (std::size_t i = 0; i < t.actual.size(); ++i) l.push_back(std::pow(t.values[k][i] - t.actual[i], 2));
        return l;
    };
    const auto r = metrics::dm_test(losses(column(t, a)), losses(column(t, b)), horizon);
    return {{"a", a}, {"b", b}, {"statistic", r.statistic}, {"p_value", r.p_value}, {"lags_used", r.lags_used},
            {"reject_at_5pct", r.reject_at_5pct}};
}

int fail(std::string_view kind, const std::string& message) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"News-aware crude-oil price forecasting toolkit"};
    app.require_subcommand(1);
    Common common;
    std::string predictions, model_a = "AGESL", model_b = "ARIMA";
    int horizon = 1;
    const auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", common.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", common.seed, "Run with this seed only");
        sub->add_option("--out", common.out, "Override the output directory");
        return sub;
    };
    auto* ingest = add("ingest", "Parse and clean prices, filter and align news");
    auto* fit_arima = add("fit-arima", "Select and fit the ARIMA mean model");
    auto* fit_garch = add("fit-garch", "Fit GARCH to the ARIMA residuals");
    auto* score = add("score-sentiment", "Write the daily sentiment vectors");
    auto* extract = add("extract-events", "Train the event model and write event records");
    auto* train = add("train", "Train and evaluate every model for one seed");
    auto* backtest = add("backtest", "Run the full experiment over all configured seeds");
    auto* evaluate = add("evaluate", "Point metrics from a predictions CSV");
    evaluate->add_option("--predictions", predictions, "predictions.csv (default: <output_dir>/predictions.csv)");
    auto* dm = add("dm-test", "Diebold-Mariano test between two models' squared errors");
    dm->add_option("--predictions", predictions, "predictions.csv (default: <output_dir>/predictions.csv)");
    dm->add_option("-a,--model-a", model_a, "First model");
    dm->add_option("-b,--model-b", model_b, "Second model");
    dm->add_option("--horizon", horizon, "Forecast horizon");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("Usage", e.what());
    }

    try {
        json result;
        if (*ingest) result = run_ingest(common);
        else if (*fit_arima) result = run_fit_arima(common);
        else if (*fit_garch) result = run_fit_garch(common);
        else if (*score) result = run_score_sentiment(common);
        else if (*extract) result = run_extract_events(common);
        else if (*train) result = run_train(common);
        else if (*backtest) result = run_backtest(common);
        else if (*evaluate) result = run_evaluate(common, predictions);
        else if (*dm) result = run_dm(common, predictions, model_a, model_b, horizon);
        std::cout << result.dump(2) << '\n';
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what());
    } catch (const std::exception& e) {
        return fail("Internal", e.what());
    }
    return 0;
}
