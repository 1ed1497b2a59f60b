#include "agesl/experiment.hpp"
#include "agesl/error.hpp"
#include "agesl/fusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace agesl::pipeline {

namespace fs = std::filesystem;
using Eigen::VectorXd;
using json = nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

fs::path resolve(const fs::path& base, const json& doc, const char* key, bool required) {
    if (!doc.contains(key)) {
        if (required) throw Error(ErrorKind::Config, std::string("config: missing key '") + key + "'");
        return {};
    }
    fs::path p = doc.at(key).get<std::string>();
    return p.is_absolute() ? p : base / p;
}

void read_network(const json& doc, NetworkConfig& n) {
    n.hidden = doc.value("hidden_dim", doc.value("hidden", n.hidden));
    n.window = doc.value("window", n.window);
    n.epochs = doc.value("epochs", n.epochs);
    n.batch_size = doc.value("batch_size", n.batch_size);
    n.lr = doc.value("lr", n.lr);
    n.patience = doc.value("patience", n.patience);
    n.clip_norm = doc.value("clip_norm", n.clip_norm);
    if (n.hidden < 1 || n.epochs < 0 || n.batch_size < 1 || n.lr <= 0.0 || n.patience < 1) {
        throw Error(ErrorKind::Config, "config: bad network settings");
    }
}

json network_json(const NetworkConfig& n) {
    return {{"hidden_dim", n.hidden}, {"window", n.window}, {"epochs", n.epochs},       {"batch_size", n.batch_size},
            {"lr", n.lr},             {"patience", n.patience}, {"clip_norm", n.clip_norm}};
}

TrainOptions train_options(const NetworkConfig& n, std::uint64_t seed) {
    TrainOptions o;
    o.epochs = n.epochs;
    o.batch_size = n.batch_size;
    o.lr = n.lr;
    o.patience = n.patience;
    o.clip_norm = n.clip_norm;
    o.seed = seed;
    return o;
}

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void log(const ExperimentConfig& c, const std::string& msg) {
    if (c.verbose) std::clog << "[agesl] " << msg << std::endl;
}

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path& base_dir) {
    ExperimentConfig c;
    try {
        c.prices = resolve(base_dir, doc, "prices", true);
        c.news = resolve(base_dir, doc, "news", false);
        c.manifest = resolve(base_dir, doc, "manifest", false);
        c.embeddings = resolve(base_dir, doc, "embeddings", false);
        c.lexicon = resolve(base_dir, doc, "lexicon", false);
        c.supersenses = resolve(base_dir, doc, "supersenses", false);
        if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc, "output_dir", true);
        else c.output_dir = base_dir / "out";
        c.filter_terms = doc.value("filter_terms", std::vector<std::string>{});
        c.items_per_day = doc.value("items_per_day", c.items_per_day);
        if (doc.contains("split")) {
            const auto& s = doc.at("split");
            c.train_ratio = s.value("train_ratio", c.train_ratio);
            c.val_fraction = s.value("val_fraction", c.val_fraction);
        }
        if (doc.contains("arima")) {
            const auto& a = doc.at("arima");
            c.arima_max_p = a.value("max_p", c.arima_max_p);
            c.arima_max_q = a.value("max_q", c.arima_max_q);
            c.arima_refit_every = a.value("refit_every", c.arima_refit_every);
        }
        if (doc.contains("garch")) c.garch_refit_every = doc.at("garch").value("refit_every", c.garch_refit_every);
        if (doc.contains("events")) {
            const auto& e = doc.at("events");
            c.odee.num_slots = e.value("num_slots", c.odee.num_slots);
            c.odee.type_dim = e.value("type_dim", c.odee.type_dim);
            c.odee.prior_hidden = e.value("prior_hidden", c.odee.prior_hidden);
            c.odee.inference_hidden = e.value("inference_hidden", c.odee.inference_hidden);
            c.odee.epochs = e.value("epochs", c.odee.epochs);
            c.odee.batch_size = e.value("batch_size", c.odee.batch_size);
            c.odee.lr = e.value("lr", c.odee.lr);
            c.odee.beta1 = e.value("beta1", c.odee.beta1);
            c.odee.beta2 = e.value("beta2", c.odee.beta2);
            c.odee.max_vocab = e.value("max_vocab", c.odee.max_vocab);
        }
        if (doc.contains("lstm")) read_network(doc.at("lstm"), c.lstm);
        if (doc.contains("fusion")) read_network(doc.at("fusion"), c.fusion);
        c.seeds = doc.value("seeds", c.seeds);
        const auto rule = doc.value("direction_rule", std::string("as_written"));
        if (rule == "as_written") c.direction_rule = metrics::DirectionRule::AsWritten;
        else if (rule == "conventional") c.direction_rule = metrics::DirectionRule::Conventional;
        else throw Error(ErrorKind::Config, "config: direction_rule must be 'as_written' or 'conventional'");
        c.models = doc.value("models", c.models);
        const auto init = doc.value("agesl_init", std::string("lstm"));
        if (init == "lstm") c.agesl_init = AgeslInit::Lstm;
        else if (init == "arima") c.agesl_init = AgeslInit::Arima;
        else throw Error(ErrorKind::Config, "config: agesl_init must be 'lstm' or 'arima'");
        c.verbose = doc.value("verbose", c.verbose);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Config, std::string("config: ") + e.what());
    }
    for (const auto& m : c.models) {
        if (std::find(kAllModels.begin(), kAllModels.end(), m) == kAllModels.end()) {
            throw Error(ErrorKind::Config, "config: unknown model '" + m + "'");
        }
    }
    if (c.seeds.empty()) throw Error(ErrorKind::Config, "config: seeds must not be empty");
    if (c.lstm.window < 1) throw Error(ErrorKind::Config, "config: lstm window must be positive");
    if (c.items_per_day < 1) throw Error(ErrorKind::Config, "config: items_per_day must be positive");
    return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, path.string() + ": " + e.what());
    }
    return from_json(doc, path.parent_path());
}

json ExperimentConfig::to_json() const {
    return {{"prices", prices.string()},
            {"news", news.string()},
            {"manifest", manifest.string()},
            {"embeddings", embeddings.string()},
            {"lexicon", lexicon.string()},
            {"supersenses", supersenses.string()},
            {"output_dir", output_dir.string()},
            {"filter_terms", filter_terms},
            {"items_per_day", items_per_day},
            {"split", {{"train_ratio", train_ratio}, {"val_fraction", val_fraction}}},
            {"arima", {{"max_p", arima_max_p}, {"max_q", arima_max_q}, {"refit_every", arima_refit_every}}},
            {"garch", {{"refit_every", garch_refit_every}}},
            {"events",
             {{"num_slots", odee.num_slots},
              {"type_dim", odee.type_dim},
              {"prior_hidden", odee.prior_hidden},
              {"inference_hidden", odee.inference_hidden},
              {"epochs", odee.epochs},
              {"batch_size", odee.batch_size},
              {"lr", odee.lr},
              {"beta1", odee.beta1},
              {"beta2", odee.beta2},
              {"max_vocab", odee.max_vocab}}},
            {"lstm", network_json(lstm)},
            {"fusion", network_json(fusion)},
            {"seeds", seeds},
            {"direction_rule", direction_rule == metrics::DirectionRule::AsWritten ? "as_written" : "conventional"},
            {"models", models},
            {"agesl_init", agesl_init == AgeslInit::Lstm ? "lstm" : "arima"}};
}

PreparedData load_inputs(const ExperimentConfig& config) {
    PreparedData d;
    auto cleaned = ingest::clean_outliers(ingest::parse_price_csv(config.prices, &d.rejected_rows));
    d.prices = std::move(cleaned.series);
    d.replacements = std::move(cleaned.replacements);
    const std::size_t n = d.prices.size();
    if (n < kNumLags + 50) throw Error(ErrorKind::InsufficientData, "price series too short for the experiment");
    d.split = plan_split(n, config.train_ratio, config.val_fraction);
    log(config, "prices: " + std::to_string(n) + " trading days, split " + std::to_string(d.split.train_end) + "/" +
                    std::to_string(d.split.val_end) + "/" + std::to_string(d.split.test_end));

    d.kept_news.assign(n, {});
    d.clusters.assign(n, std::nullopt);
    d.supersenses = config.supersenses.empty() ? events::SupersenseTable::bundled()
                                               : events::SupersenseTable::load(config.supersenses);
    if (config.news.empty()) return d;

    const auto lexicon = config.lexicon.empty() ? sentiment::SentimentLexicon::bundled()
                                                : sentiment::SentimentLexicon::load(config.lexicon);
    const auto days = ingest::parse_news_jsonl(config.news, config.filter_terms);
    auto aligned = ingest::align_to_trading_days(days, d.prices.dates(), &d.dropped_news);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& items = aligned[i];
        if (items.empty()) continue;
        std::vector<std::string> texts;
        for (const auto& it : items) texts.push_back(it.text());
        const auto scores = sentiment::score_batch(texts, lexicon);
        const auto keep = ingest::top_items_by_sentiment(scores, config.items_per_day);
        std::vector<sentiment::SentimentVector> kept_scores;
        for (auto k : keep) {
            d.kept_news[i].push_back(items[k]);
            kept_scores.push_back(scores[k]);
        }
        d.sentiments[d.prices.dates()[i]] = sentiment::aggregate_daily(kept_scores);
        total += keep.size();
    }
    log(config, "news: " + std::to_string(total) + " items kept on " + std::to_string(d.sentiments.size()) +
                    " trading days, " + std::to_string(d.dropped_news) + " dropped after the last trading day");

    if (config.manifest.empty() || config.embeddings.empty()) return d;
    d.embeddings = text::EmbeddingTable::load(config.embeddings);
    const auto manifest = text::read_manifest(config.manifest);
    const auto base = config.manifest.parent_path();
    std::unordered_map<std::size_t, const text::ManifestEntry*> by_line;
    for (const auto& e : manifest) by_line[e.source_line] = &e;
    std::map<std::string, std::unordered_map<std::string, text::Document>> files;
    for (std::size_t i = 0; i < n; ++i) {
        if (d.kept_news[i].empty()) continue;
        std::vector<text::Document> docs;
        for (const auto& item : d.kept_news[i]) {
            const auto it = by_line.find(item.line);
            if (it == by_line.end()) {
                throw Error(ErrorKind::MissingAnnotation, config.news.string() + ":" + std::to_string(item.line) +
                                                              ": news item has no manifest entry; re-run the preproc annotate tool");
            }
            const auto& entry = *it->second;
            auto& file = files[entry.conllu];
            if (file.empty()) {
                for (auto& doc : text::read_conllu(base / entry.conllu)) {
                    auto id = doc.id;
                    file.emplace(std::move(id), std::move(doc));
                }
            }
            const auto doc = file.find(entry.item_id);
            if (doc == file.end()) {
                throw Error(ErrorKind::MissingAnnotation, "manifest item '" + entry.item_id + "' not found in " + entry.conllu +
                                                              "; re-run the preproc annotate tool");
            }
            docs.push_back(doc->second);
        }
        d.clusters[i] = events::make_cluster(d.prices.dates()[i], std::move(docs), d.embeddings);
    }
    return d;
}

void fit_mean_model(PreparedData& d, const ExperimentConfig& config) {
    const auto values = d.prices.view();
    const auto train = values.first(d.split.train_end);
    const auto spec = arima::select_order(train, config.arima_max_p, config.arima_max_q);
    d.arima = arima::fit(train, spec);
    d.arima_mean = arima::one_step_predictions(d.arima, values);
    const auto rolling =
        arima::rolling_forecast(values, spec, d.split.train_end, arima::RollingOptions{config.arima_refit_every});
    for (std::size_t t = d.split.train_end; t < values.size(); ++t) d.arima_mean[t] = rolling.predictions[t];
    log(config, "arima: (" + std::to_string(spec.p) + "," + std::to_string(spec.d) + "," + std::to_string(spec.q) + "), " +
                    std::to_string(rolling.refits) + " rolling refits");
}

void fit_volatility_model(PreparedData& d, const ExperimentConfig& config) {
    const auto values = d.prices.view();
    std::size_t s0 = 0;
    while (s0 < values.size() && !std::isfinite(d.arima_mean[s0])) ++s0;
    s0 = std::max(s0, kNumLags);
    d.garch_offset = s0;
    std::vector<double> resid;
    for (std::size_t t = s0; t < values.size(); ++t) resid.push_back(values[t] - d.arima_mean[t]);
    const std::size_t train_n = d.split.train_end - s0;
    const std::span<const double> all(resid);
    d.garch = garch::fit_best(all.first(train_n));
    const auto in_sample = garch::conditional_variances(d.garch, all.first(train_n));
    const auto rolling = garch::rolling_variance(all, train_n, {config.garch_refit_every, d.garch.m(), d.garch.s()});
    d.garch_var.assign(values.size(), kNaN);
    for (std::size_t k = 0; k < resid.size(); ++k) d.garch_var[s0 + k] = k < train_n ? in_sample[k] : rolling.variances[k];
    log(config, "garch: (" + std::to_string(d.garch.m()) + "," + std::to_string(d.garch.s()) + "), persistence " +
                    std::to_string(d.garch.persistence()));
}

PreparedData prepare(const ExperimentConfig& config) {
    auto d = load_inputs(config);
    fit_mean_model(d, config);
    fit_volatility_model(d, config);
    return d;
}

EventStage extract_events(const PreparedData& d, const ExperimentConfig& config, std::uint64_t seed) {
    std::vector<events::NewsCluster> train;
    for (std::size_t i = 0; i < d.split.train_end; ++i) {
        if (d.clusters[i] && !d.clusters[i]->entities.empty()) train.push_back(*d.clusters[i]);
    }
    auto cfg = config.odee;
    cfg.seed = seed;
    EventStage stage{events::train(train, cfg), {}};
    for (std::size_t i = 0; i < d.clusters.size(); ++i) {
        if (!d.clusters[i]) continue;
        const auto& cluster = *d.clusters[i];
        const auto t = events::infer_type(stage.params, cluster);
        const auto post = events::slot_posteriors(stage.params, cluster, t);
        stage.records[cluster.date] = events::assemble_events(cluster, post, t, d.embeddings, d.supersenses);
    }
    return stage;
}

namespace {

/// Per-seed working set shared by the models.
struct SeedData {
    std::vector<FeatureRow> rows;
    std::size_t train_end = 0;  // row positions
    std::size_t val_end = 0;
    TargetScaler scaler;
    std::vector<double> targets_z;
};

std::size_t first_row_at(const std::vector<FeatureRow>& rows, std::size_t index) {
    return static_cast<std::size_t>(
        std::lower_bound(rows.begin(), rows.end(), index, [](const FeatureRow& r, std::size_t i) { return r.index < i; }) -
        rows.begin());
}

std::vector<double> to_prices(const SeedData& s, const std::vector<double>& z, const std::vector<std::size_t>& rows) {
    std::vector<double> out(z.size());
    for (std::size_t k = 0; k < z.size(); ++k) out[k] = s.scaler.to_price(s.rows[rows[k]], z[k]);
    return out;
}

struct LstmModel {
    nn::LstmRegressor net;
    SequenceSet train, val, test;
    TrainHistory history;
};

LstmModel fit_lstm(const SeedData& s, InputKind kind, const ExperimentConfig& config, std::uint64_t seed, int type_dim,
                   int arg_dim) {
    std::vector<VectorXd> raw;
    raw.reserve(s.rows.size());
    for (const auto& r : s.rows) raw.push_back(encode_row(r, kind));
    const auto scaler = Standardizer::fit({raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(s.train_end)});
    for (auto& x : raw) x = scaler.apply(x);
    const int w = config.lstm.window;
    LstmModel m{nn::LstmRegressor(input_dim(kind, type_dim, arg_dim), config.lstm.hidden, seed),
                make_sequences(raw, s.targets_z, 0, s.train_end, w), make_sequences(raw, s.targets_z, s.train_end, s.val_end, w),
                make_sequences(raw, s.targets_z, s.val_end, s.rows.size(), w), {}};
    m.history = train_lstm(m.net, m.train, m.val, train_options(config.lstm, seed));
    return m;
}

/// Fusion inputs for the rows of `set`: arima_z, GARCH sd, [LSTM slot],
/// neg, neu, pos, compound. Everything except the arima and LSTM entries is
/// z-scored with training statistics.
struct FusionInputs {
    Standardizer scaler;  // over garch sd and sentiment
    bool with_lstm = false;

    nn::Mat build(const SeedData& s, const std::vector<std::size_t>& rows) const {
        const int m = with_lstm ? 7 : 6;
        nn::Mat z = nn::Mat::Zero(m, static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& r = s.rows[rows[k]];
            const auto x = scaler.apply(raw(r));
            const auto col = static_cast<Eigen::Index>(k);
            z(0, col) = s.scaler.to_z(r, r.arima_mean);
            z(1, col) = x[0];
            const int off = with_lstm ? 3 : 2;
            for (int j = 0; j < 4; ++j) z(off + j, col) = x[1 + j];
        }
        return z;
    }
    static VectorXd raw(const FeatureRow& r) {
        VectorXd v(5);
        v << std::sqrt(std::max(r.garch_var, 0.0)), r.sentiment.neg, r.sentiment.neu, r.sentiment.pos, r.sentiment.compound;
        return v;
    }
};

FusionInputs fusion_inputs(const SeedData& s, bool with_lstm) {
    std::vector<VectorXd> raw;
    for (std::size_t k = 0; k < s.train_end; ++k) raw.push_back(FusionInputs::raw(s.rows[k]));
    return {Standardizer::fit(raw), with_lstm};
}

FusionData fusion_data(const SeedData& s, const FusionInputs& in, const SequenceSet& set) {
    return {in.build(s, set.rows), set.targets, in.with_lstm ? &set : nullptr};
}

}  // namespace

SeedResult run_seed(const PreparedData& d, const ExperimentConfig& config, std::uint64_t seed) {
    SeedResult result;
    result.seed = seed;
    const auto wants = [&](const std::string& m) {
        return std::find(config.models.begin(), config.models.end(), m) != config.models.end();
    };
    const int type_dim = config.odee.type_dim;
    const int arg_dim = d.embeddings.dim() > 0 ? d.embeddings.dim() : events::kArgDim;

    std::map<Date, events::EventRecord> records;
    std::string event_error;
    if (wants("LSTM-Event") || wants("AGESL")) {
        const auto t0 = Clock::now();
        try {
            auto stage = extract_events(d, config, seed);
            records = std::move(stage.records);
            result.odee_elbo = stage.params.elbo_history;
            log(config, "seed " + std::to_string(seed) + ": events extracted in " + std::to_string(since(t0)) + " s");
        } catch (const std::exception& e) {
            event_error = std::string("event extraction failed: ") + e.what();
        }
    }

    SeedData s;
    s.rows = build_features(d.prices, d.sentiments, records, d.arima_mean, d.garch_var, type_dim, arg_dim);
    s.train_end = first_row_at(s.rows, d.split.train_end);
    s.val_end = first_row_at(s.rows, d.split.val_end);
    s.scaler = TargetScaler::fit(std::span(s.rows).first(s.train_end));
    for (const auto& r : s.rows) s.targets_z.push_back(s.scaler.to_z(r, r.target));

    std::vector<std::size_t> test_rows;
    std::vector<double> actuals;
    for (std::size_t k = s.val_end; k < s.rows.size(); ++k) {
        test_rows.push_back(k);
        actuals.push_back(s.rows[k].target);
    }

    TrainHistory last_history;
    const auto record = [&](const std::string& name, auto&& body) {
        if (!wants(name)) return;
        last_history = {};
        ModelRun run;
        run.model = name;
        run.seed = seed;
        const auto t0 = Clock::now();
        try {
            run.predictions = body();
            if (run.predictions.size() != actuals.size()) throw Error(ErrorKind::Range, "prediction count mismatch");
            run.report = metrics::point_metrics(actuals, run.predictions, config.direction_rule);
            run.ok = true;
        } catch (const std::exception& e) {
            run.error = e.what();
        }
        run.seconds = since(t0);
        run.val_rmse = last_history.val_rmse;
        run.best_epoch = last_history.best_epoch;
        log(config, "seed " + std::to_string(seed) + ": " + name +
                        (run.ok ? " rmse " + std::to_string(run.report.rmse) : " failed: " + run.error) + " (" +
                        std::to_string(run.seconds) + " s, best epoch " + std::to_string(run.best_epoch) + ")");
        result.runs.push_back(std::move(run));
    };

    record("ARIMA", [&] {
        std::vector<double> out;
        for (auto k : test_rows) out.push_back(s.rows[k].arima_mean);
        return out;
    });

    const auto lstm_run = [&](InputKind kind) {
        auto m = fit_lstm(s, kind, config, seed, type_dim, arg_dim);
        last_history = m.history;
        return to_prices(s, predict_lstm(m.net, m.test), m.test.rows);
    };
    record("LSTM", [&] { return lstm_run(InputKind::Lags); });
    record("LSTM-Sent", [&] { return lstm_run(InputKind::LagsSentiment); });

    std::optional<LstmModel> event_lstm;
    const auto require_events = [&] {
        if (!event_error.empty()) throw Error(ErrorKind::Degenerate, event_error);
    };
    if (wants("LSTM-Event") || wants("AGESL")) {
        record("LSTM-Event", [&] {
            require_events();
            event_lstm = fit_lstm(s, InputKind::Full, config, seed, type_dim, arg_dim);
            last_history = event_lstm->history;
            return to_prices(s, predict_lstm(event_lstm->net, event_lstm->test), event_lstm->test.rows);
        });
    }

    record("ARIMA-GARCH-Sent", [&] {
        const auto in = fusion_inputs(s, false);
        const int w = config.lstm.window;
        std::vector<VectorXd> dummy(s.rows.size(), VectorXd::Zero(1));
        const auto tr = make_sequences(dummy, s.targets_z, 0, s.train_end, w);
        const auto va = make_sequences(dummy, s.targets_z, s.train_end, s.val_end, w);
        const auto te = make_sequences(dummy, s.targets_z, s.val_end, s.rows.size(), w);
        FusionHead head(6, config.fusion.hidden, seed);
        head.identity_init(0);
        last_history = fuse_and_train(head, nullptr, -1, fusion_data(s, in, tr), fusion_data(s, in, va),
                                      train_options(config.fusion, seed));
        return to_prices(s, predict_fusion(head, nullptr, -1, fusion_data(s, in, te)), te.rows);
    });

    record("AGESL", [&] {
        require_events();
        if (!event_lstm) event_lstm = fit_lstm(s, InputKind::Full, config, seed, type_dim, arg_dim);
        auto& m = *event_lstm;
        const auto in = fusion_inputs(s, true);
        FusionHead head(7, config.fusion.hidden, seed);
        head.identity_init(config.agesl_init == AgeslInit::Lstm ? 2 : 0);
        last_history = fuse_and_train(head, &m.net, 2, fusion_data(s, in, m.train), fusion_data(s, in, m.val),
                                      train_options(config.fusion, seed));
        return to_prices(s, predict_fusion(head, &m.net, 2, fusion_data(s, in, m.test)), m.test.rows);
    });
    return result;
}

const ModelSummary* ExperimentResult::summary(std::string_view model) const {
    for (const auto& s : summaries) {
        if (s.model == model) return &s;
    }
    return nullptr;
}

ExperimentResult summarize(const PreparedData& d, std::vector<SeedResult> seeds, const std::vector<std::string>& models) {
    ExperimentResult r;
    r.split = d.split;
    r.arima_spec = d.arima.spec;
    const std::size_t first = d.split.val_end;
    for (std::size_t t = first; t < d.prices.size(); ++t) {
        r.test_dates.push_back(d.prices.dates()[t]);
        r.actuals.push_back(d.prices.values()[t]);
    }
    const std::size_t n = r.actuals.size();
    for (const auto& m : models) {
        ModelSummary s;
        s.model = m;
        std::vector<double> rmse, mape, ds;
        s.mean_predictions.assign(n, 0.0);
        for (const auto& seed : seeds) {
            for (const auto& run : seed.runs) {
                if (run.model != m) continue;
                if (!run.ok) {
                    s.errors.push_back("seed " + std::to_string(run.seed) + ": " + run.error);
                    continue;
                }
                ++s.ok_runs;
                rmse.push_back(run.report.rmse);
                mape.push_back(run.report.mape);
                ds.push_back(run.report.ds);
                for (std::size_t k = 0; k < n; ++k) s.mean_predictions[k] += run.predictions[k];
            }
        }
        if (s.ok_runs > 0) {
            for (auto& p : s.mean_predictions) p /= static_cast<double>(s.ok_runs);
            const auto mean = [](const std::vector<double>& v) {
                return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
            };
            s.mean = {mean(rmse), mean(mape), mean(ds), n};
            s.median = {median(rmse), median(mape), median(ds), n};
        } else {
            s.mean_predictions.clear();
            s.mean = s.median = {kNaN, kNaN, kNaN, n};
        }
        r.summaries.push_back(std::move(s));
    }

    std::vector<std::vector<double>> losses(r.summaries.size());
    for (std::size_t i = 0; i < r.summaries.size(); ++i) {
        const auto& s = r.summaries[i];
        if (s.ok_runs == 0) continue;
        for (std::size_t k = 0; k < n; ++k) {
            double sq = 0.0;
            for (const auto& seed : seeds) {
                for (const auto& run : seed.runs) {
                    if (run.model == s.model && run.ok) sq += std::pow(run.predictions[k] - r.actuals[k], 2);
                }
            }
            losses[i].push_back(sq / static_cast<double>(s.ok_runs));
        }
    }
    for (std::size_t i = 0; i < r.summaries.size(); ++i) {
        for (std::size_t j = 0; j < r.summaries.size(); ++j) {
            DmEntry e{r.summaries[i].model, r.summaries[j].model, {}};
            if (losses[i].empty() || losses[j].empty()) {
                e.report = {kNaN, kNaN, 0, false};
            } else {
                try {
                    e.report = metrics::dm_test(losses[i], losses[j], 1);
                } catch (const std::exception&) {
                    e.report = {kNaN, kNaN, 0, false};
                }
            }
            r.dm.push_back(e);
        }
    }
    r.seeds = std::move(seeds);
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const auto t0 = Clock::now();
    const auto data = prepare(config);
    std::vector<SeedResult> seeds;
    for (auto seed : config.seeds) seeds.push_back(run_seed(data, config, seed));
    auto r = summarize(data, std::move(seeds), config.models);
    r.seconds = since(t0);
    return r;
}

namespace {

std::string num(double x) {
    if (!std::isfinite(x)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

json report_json(const metrics::EvalReport& e) {
    const auto j = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    return {{"rmse", j(e.rmse)}, {"mape", j(e.mape)}, {"ds", j(e.ds)}, {"n", e.n}};
}

}  // namespace

void write_outputs(const ExperimentResult& r, const fs::path& dir) {
    fs::create_directories(dir);
    const auto open = [&](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("metrics.csv");
        out << "model,seed,status,rmse,mape,ds,n,seconds\n";
        for (const auto& s : r.seeds) {
            for (const auto& run : s.runs) {
                out << run.model << ',' << run.seed << ',' << (run.ok ? "ok" : "failed") << ',' << num(run.report.rmse) << ','
                    << num(run.report.mape) << ',' << num(run.report.ds) << ',' << run.report.n << ',' << num(run.seconds)
                    << '\n';
            }
        }
    }
    {
        auto out = open("summary.csv");
        out << "model,runs,mean_rmse,mean_mape,mean_ds,median_rmse,median_mape,median_ds\n";
        for (const auto& s : r.summaries) {
            out << s.model << ',' << s.ok_runs << ',' << num(s.mean.rmse) << ',' << num(s.mean.mape) << ',' << num(s.mean.ds)
                << ',' << num(s.median.rmse) << ',' << num(s.median.mape) << ',' << num(s.median.ds) << '\n';
        }
    }
    {
        auto out = open("predictions.csv");
        out << "date,actual";
        for (const auto& s : r.summaries) out << ',' << s.model;
        out << '\n';
        for (std::size_t k = 0; k < r.actuals.size(); ++k) {
            out << r.test_dates[k].iso() << ',' << num(r.actuals[k]);
            for (const auto& s : r.summaries) out << ',' << (s.mean_predictions.empty() ? "nan" : num(s.mean_predictions[k]));
            out << '\n';
        }
    }
    {
        auto out = open("dm.csv");
        out << "model_a,model_b,statistic,p_value\n";
        for (const auto& e : r.dm) out << e.a << ',' << e.b << ',' << num(e.report.statistic) << ',' << num(e.report.p_value) << '\n';
    }
    json rep;
    rep["split"] = {{"train_end", r.split.train_end}, {"val_end", r.split.val_end}, {"test_end", r.split.test_end}};
    rep["arima"] = {{"p", r.arima_spec.p}, {"d", r.arima_spec.d}, {"q", r.arima_spec.q}};
    rep["seconds"] = r.seconds;
    for (const auto& s : r.summaries) {
        rep["models"][s.model] = {{"runs", s.ok_runs}, {"mean", report_json(s.mean)}, {"median", report_json(s.median)},
                                  {"errors", s.errors}};
    }
    for (const auto& e : r.dm) {
        rep["dm"][e.a][e.b] = {{"statistic", std::isfinite(e.report.statistic) ? json(e.report.statistic) : json(nullptr)},
                               {"p_value", std::isfinite(e.report.p_value) ? json(e.report.p_value) : json(nullptr)}};
    }
    for (const auto& s : r.seeds) {
        json seed{{"seed", s.seed}, {"odee_elbo", s.odee_elbo}};
        for (const auto& run : s.runs) {
            seed["runs"].push_back({{"model", run.model}, {"ok", run.ok}, {"error", run.error}, {"report", report_json(run.report)},
                                    {"seconds", run.seconds}, {"best_epoch", run.best_epoch}, {"val_rmse", run.val_rmse}});
        }
        rep["seeds"].push_back(seed);
    }
    open("report.json") << rep.dump(2) << '\n';
}

}  // namespace agesl::pipeline
