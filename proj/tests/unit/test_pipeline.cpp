#include "common.hpp"

#include "agesl/error.hpp"
#include "agesl/experiment.hpp"
#include "agesl/features.hpp"
#include "agesl/fusion.hpp"
#include "agesl/metrics.hpp"
#include "agesl/synthetic.hpp"

#include <algorithm>
#include <cmath>

using namespace agesl;
using namespace agesl::pipeline;
using Eigen::VectorXd;

namespace {

PriceSeries ramp(std::size_t n) {
    std::vector<Date> d;
    std::vector<double> v;
    const Date start(2020, 1, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.push_back(Date::from_days(start.days_since_epoch() + static_cast<std::int64_t>(i)));
        v.push_back(50.0 + static_cast<double>(i));
    }
    return {d, v};
}

double brute_ds(const std::vector<double>& y, const std::vector<double>& p, bool as_written) {
    int hits = 0;
    for (std::size_t t = 0; t + 1 < y.size(); ++t) {
        const double move = y[t + 1] - y[t];
        const double other = as_written ? y[t + 1] - p[t + 1] : p[t + 1] - y[t];
        if (move * other >= 0) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(y.size() - 1);
}

/// target = arima_mean + 0.5 * compound * sqrt(garch_var) + noise, fed to the
/// head as [arima_mean, sd, neg, neu, pos, compound] with the last five
/// z-scored on the first `train` samples.
struct FusionCase {
    FusionData train, val;
    std::vector<double> val_arima;
};

FusionCase fusion_case(std::uint64_t seed) {
    const std::size_t n = 1500, n_train = 1200;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> arima(n), var(n), comp(n), neg(n), pos(n), target(n);
    double level = 60.0, s2 = 1.0, a = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        s2 = 0.05 + 0.1 * a * a + 0.85 * s2;
        a = std::sqrt(s2) * z(rng);
        level += 0.3 * z(rng);
        arima[t] = level;
        var[t] = s2;
        comp[t] = u(rng);
        neg[t] = std::max(0.0, -comp[t]) * 0.3;
        pos[t] = std::max(0.0, comp[t]) * 0.3;
        target[t] = arima[t] + 0.5 * comp[t] * std::sqrt(var[t]) + 0.15 * z(rng);
    }
    std::vector<VectorXd> raw;
    for (std::size_t t = 0; t < n_train; ++t) {
        raw.push_back((VectorXd(5) << std::sqrt(var[t]), neg[t], 1 - neg[t] - pos[t], pos[t], comp[t]).finished());
    }
    const auto scaler = Standardizer::fit(raw);
    const auto build = [&](std::size_t b, std::size_t e) {
        FusionData d;
        d.z.resize(6, static_cast<Eigen::Index>(e - b));
        for (std::size_t t = b; t < e; ++t) {
            const auto col = static_cast<Eigen::Index>(t - b);
            d.z(0, col) = arima[t];
            d.z.col(col).tail(5) =
                scaler.apply((VectorXd(5) << std::sqrt(var[t]), neg[t], 1 - neg[t] - pos[t], pos[t], comp[t]).finished());
            d.targets.push_back(target[t]);
        }
        return d;
    };
    FusionCase c{build(0, n_train), build(n_train, n), {}};
    c.val_arima.assign(arima.begin() + n_train, arima.end());
    return c;
}

ExperimentConfig tiny_config(const std::filesystem::path& dir) {
    auto doc = nlohmann::json::parse(R"({
      "prices": "prices.csv", "news": "news.jsonl", "manifest": "manifest.jsonl", "embeddings": "embeddings.txt",
      "filter_terms": ["oil"],
      "events": {"epochs": 2, "num_slots": 4},
      "lstm": {"hidden_dim": 4, "window": 3, "epochs": 3, "batch_size": 32, "lr": 0.003, "patience": 2},
      "fusion": {"hidden_dim": 4, "epochs": 3, "patience": 2},
      "seeds": [1]
    })");
    return ExperimentConfig::from_json(doc, dir);
}

const std::filesystem::path& tiny_corpus() {
    static const auto dir = [] {
        auto d = testing::scratch_dir("tiny-corpus");
        synthetic::MarketOptions o;
        o.num_days = 260;
        synthetic::write_market_corpus(synthetic::generate_market_corpus(o, 8), d);
        return d;
    }();
    return dir;
}

}  // namespace

TEST_CASE("feature rows") {
    const auto prices = ramp(30);
    std::map<Date, sentiment::SentimentVector> sent{{prices.dates()[24], {0.1, 0.6, 0.3, 0.4}}};
    std::map<Date, events::EventRecord> ev;
    auto rec = events::empty_record(events::kTypeDim, events::kArgDim);
    rec.type_vec.setOnes();
    ev[prices.dates()[24]] = rec;
    const std::vector<double> mean(30, 1.0), var(30, 2.0);
    const auto rows = build_features(prices, sent, ev, mean, var);
    REQUIRE(rows.size() == 10);
    CHECK(rows[0].index == 20);
    CHECK(rows[0].date == prices.dates()[20]);
    CHECK(rows[0].price_lags.front() == 50.0);
    CHECK(rows[0].last_price() == 69.0);
    CHECK(rows[0].target == 70.0);
    CHECK(rows[0].concatenated().size() == 320);
    CHECK(rows[0].concatenated().size() == kFeatureDim);

    // news of day 24 informs the forecast of day 25
    CHECK(rows[5].has_news);
    CHECK(rows[5].sentiment.compound == 0.4);
    CHECK(rows[5].type_vec.sum() == 100.0);
    CHECK_FALSE(rows[4].has_news);
    CHECK(rows[4].sentiment == sentiment::SentimentVector{0, 1, 0, 0});
    CHECK(rows[4].type_vec.isZero());
}

TEST_CASE("feature alignment errors name the offenders") {
    const auto prices = ramp(30);
    std::map<Date, sentiment::SentimentVector> sent{{Date(2019, 5, 5), {}}, {Date(2019, 5, 6), {}}};
    const std::vector<double> mean(30, 1.0), var(30, 2.0);
    try {
        build_features(prices, sent, {}, mean, var);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Alignment);
        CHECK(std::string(e.what()).find("2019-05-05") != std::string::npos);
        CHECK(std::string(e.what()).find("2019-05-06") != std::string::npos);
    }
    CHECK_THROWS_AS(build_features(ramp(20), {}, {}, std::vector<double>(20), std::vector<double>(20)), Error);
}

TEST_CASE("split plan") {
    const auto s = plan_split(3522);
    CHECK(s.train_end == 2535);
    CHECK(s.val_end == 2817);
    CHECK(s.test_end == 3522);
    CHECK(s.val_end - s.train_end == 282);
    CHECK(s.test_end - s.val_end == 705);
    CHECK(plan_split(3522) == s);
    CHECK(plan_split(3).train_end == 1);
    CHECK_THROWS_AS(plan_split(2), Error);
    CHECK_THROWS_AS(plan_split(100, 1.2), Error);
}

TEST_CASE("standardizer and target scaling") {
    const std::vector<VectorXd> xs{(VectorXd(2) << 1, 5).finished(), (VectorXd(2) << 3, 5).finished()};
    const auto s = Standardizer::fit(xs);
    CHECK(s.apply(xs[0])[0] == doctest::Approx(-1.0));
    CHECK(s.apply(xs[0])[1] == 0.0);

    FeatureRow a, b;
    a.price_lags.back() = 10;
    a.target = 11;
    b.price_lags.back() = 11;
    b.target = 14;
    const std::vector<FeatureRow> rows{a, b};
    const auto t = TargetScaler::fit(rows);
    CHECK(t.mean == doctest::Approx(2.0));
    CHECK(t.to_price(a, t.to_z(a, 11.0)) == doctest::Approx(11.0));
}

TEST_CASE("sequence windows skip incomplete history") {
    std::vector<VectorXd> enc;
    std::vector<double> targets;
    for (int i = 0; i < 10; ++i) {
        enc.push_back(VectorXd::Constant(2, i));
        targets.push_back(i);
    }
    const auto s = make_sequences(enc, targets, 0, 10, 4);
    CHECK(s.sequences.size() == 7);
    CHECK(s.rows.front() == 3);
    CHECK(s.sequences.front()(0, 0) == 0.0);
    CHECK(s.sequences.front()(0, 3) == 3.0);
    CHECK(s.targets.front() == 3.0);
}

TEST_CASE("input encodings") {
    FeatureRow r;
    r.type_vec = VectorXd::Zero(events::kTypeDim);
    r.arg_embedding = VectorXd::Zero(events::kArgDim);
    for (std::size_t k = 0; k < kNumLags; ++k) r.price_lags[k] = 40.0 + static_cast<double>(k);
    CHECK(encode_row(r, InputKind::Lags).size() == 20);
    CHECK(encode_row(r, InputKind::LagsSentiment).size() == 24);
    CHECK(encode_row(r, InputKind::Full).size() == 320);
    CHECK(encode_row(r, InputKind::Lags)[19] == 0.0);
    CHECK(encode_row(r, InputKind::Lags)[0] == -19.0);
}

TEST_CASE("fusion identity initialization copies its input") {
    FusionHead head(7, 16, 3);
    head.identity_init(0);
    nn::Mat z(7, 50);
    const auto v = testing::normals(350, 4, 10.0);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = v[static_cast<std::size_t>(i)] + 60.0;
    const VectorXd out = head.forward(z);
    for (Eigen::Index c = 0; c < z.cols(); ++c) CHECK(out[c] == z(0, c));
    CHECK_THROWS_AS(head.identity_init(7), Error);
}

TEST_CASE("fusion head gradients match finite differences") {
    FusionHead head(5, 6, 9);
    VectorXd p = head.pack();
    const auto jitter = testing::normals(static_cast<std::size_t>(p.size()), 10, 0.5);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += jitter[static_cast<std::size_t>(i)];
    head.unpack(p);
    nn::Mat z(5, 4);
    const auto zv = testing::normals(20, 11);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = zv[static_cast<std::size_t>(i)];
    const VectorXd up = (VectorXd(4) << 0.3, -1, 2, 0.5).finished();
    const auto g = head.backward(z, up);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        VectorXd q = p;
        q[i] += h;
        head.unpack(q);
        const double a = up.dot(head.forward(z));
        q[i] -= 2 * h;
        head.unpack(q);
        const double b = up.dot(head.forward(z));
        CHECK(g.params[i] == doctest::Approx((a - b) / (2 * h)).epsilon(1e-5));
    }
    head.unpack(p);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        nn::Mat zp = z;
        zp(i) += h;
        const double a = up.dot(head.forward(zp));
        zp(i) -= 2 * h;
        const double b = up.dot(head.forward(zp));
        CHECK(g.input(i) == doctest::Approx((a - b) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("zero-epoch fusion leaves the model unchanged") {
    const auto c = fusion_case(1);
    FusionHead head(6, 8, 2);
    head.identity_init(0);
    const VectorXd before = head.pack();
    TrainOptions opt;
    opt.epochs = 0;
    fuse_and_train(head, nullptr, -1, c.train, c.val, opt);
    CHECK(head.pack() == before);
    const auto pred = predict_fusion(head, nullptr, -1, c.val);
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK(pred[i] == c.val_arima[i]);
}

TEST_CASE("zero-epoch fusion leaves a joint LSTM unchanged") {
    std::vector<VectorXd> enc;
    std::vector<double> t;
    for (int i = 0; i < 40; ++i) {
        enc.push_back(VectorXd::Constant(3, std::sin(i)));
        t.push_back(std::cos(i));
    }
    const auto seqs = make_sequences(enc, t, 0, 40, 4);
    FusionData d;
    d.z = nn::Mat::Zero(3, static_cast<Eigen::Index>(seqs.targets.size()));
    d.targets = seqs.targets;
    d.sequences = &seqs;
    nn::LstmRegressor lstm(3, 4, 5);
    const VectorXd lstm_before = lstm.params();
    FusionHead head(3, 4, 6);
    head.identity_init(1);
    TrainOptions opt;
    opt.epochs = 0;
    fuse_and_train(head, &lstm, 1, d, d, opt);
    CHECK(lstm.params() == lstm_before);
    const auto pred = predict_fusion(head, &lstm, 1, d);
    const auto direct = predict_lstm(lstm, seqs);
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK(pred[i] == doctest::Approx(direct[i]).epsilon(1e-14));
}

TEST_CASE("fusion learns the sentiment-volatility term") {
    std::vector<double> gains;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = fusion_case(seed);
        FusionHead head(6, 16, seed);
        head.identity_init(0);
        TrainOptions opt;
        opt.epochs = 150;
        opt.patience = 30;
        opt.lr = 3e-3;
        opt.seed = seed;
        fuse_and_train(head, nullptr, -1, c.train, c.val, opt);
        const double fused = metrics::rmse(c.val.targets, predict_fusion(head, nullptr, -1, c.val));
        const double base = metrics::rmse(c.val.targets, c.val_arima);
        gains.push_back(1.0 - fused / base);
    }
    std::sort(gains.begin(), gains.end());
    CHECK(gains[2] >= 0.10);
}

TEST_CASE("early stopping never returns a worse validation score") {
    const auto c = fusion_case(7);
    FusionHead head(6, 8, 7);
    head.identity_init(0);
    TrainOptions opt;
    opt.epochs = 20;
    opt.lr = 0.5;  // deliberately unstable
    opt.patience = 3;
    const auto h = fuse_and_train(head, nullptr, -1, c.train, c.val, opt);
    const double final_rmse = metrics::rmse(c.val.targets, predict_fusion(head, nullptr, -1, c.val));
    CHECK(final_rmse <= h.val_rmse.front() + 1e-12);
    CHECK(h.best_val_rmse == doctest::Approx(final_rmse));
}

TEST_CASE("divergent fusion training aborts") {
    auto c = fusion_case(3);
    c.train.targets[5] = 1e12;
    FusionHead head(6, 4, 1);
    TrainOptions opt;
    opt.epochs = 5;
    try {
        fuse_and_train(head, nullptr, -1, c.train, c.val, opt);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonFinite);
    }
}

TEST_CASE("point metric examples") {
    const auto r = metrics::point_metrics(std::vector<double>{1, 2}, std::vector<double>{1, 2});
    CHECK(r.rmse == 0.0);
    CHECK(r.mape == 0.0);
    CHECK(metrics::mape(std::vector<double>{2}, std::vector<double>{1}) == 0.5);
    CHECK(metrics::direction_statistic(std::vector<double>{1, 2}, std::vector<double>{1, 1.5}) == 1.0);
    CHECK(metrics::direction_statistic(std::vector<double>{1}, std::vector<double>{1}) == 0.0);
    CHECK_THROWS_AS(metrics::mape(std::vector<double>{0, 1}, std::vector<double>{1, 1}), Error);
    CHECK_THROWS_AS(metrics::rmse(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("metrics match brute-force loops") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> len(2, 60);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = len(rng);
        std::vector<double> y(n), p(n);
        for (int i = 0; i < n; ++i) {
            y[i] = 50.0 + 5.0 * z(rng);
            p[i] = y[i] + z(rng);
        }
        double se = 0.0, ape = 0.0;
        for (int i = 0; i < n; ++i) {
            se += (y[i] - p[i]) * (y[i] - p[i]);
            ape += std::abs((y[i] - p[i]) / y[i]);
        }
        CHECK(std::abs(metrics::rmse(y, p) - std::sqrt(se / n)) <= 1e-10);
        CHECK(std::abs(metrics::mape(y, p) - ape / n) <= 1e-10);
        CHECK(std::abs(metrics::direction_statistic(y, p) - brute_ds(y, p, true)) <= 1e-10);
        CHECK(std::abs(metrics::direction_statistic(y, p, metrics::DirectionRule::Conventional) - brute_ds(y, p, false)) <= 1e-10);
    }
}

TEST_CASE("rmse is zero only for identical forecasts") {
    CHECK(metrics::rmse(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}) == 0.0);
    CHECK(metrics::rmse(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3.000001}) > 0.0);
}

TEST_CASE("dm test matches the reference implementation") {
    const auto doc = testing::load_json("dm_oracle.json");
    for (const auto& c : doc) {
        const auto a = c.at("losses_a").get<std::vector<double>>();
        const auto b = c.at("losses_b").get<std::vector<double>>();
        const auto r = metrics::dm_test(a, b, c.at("horizon").get<int>());
        CHECK(r.statistic == doctest::Approx(c.at("statistic").get<double>()).epsilon(1e-10));
        CHECK(r.p_value == doctest::Approx(c.at("p_value").get<double>()).epsilon(1e-8));
    }
    const auto& half = doc.at(0);
    CHECK(metrics::dm_test(half.at("losses_a").get<std::vector<double>>(), half.at("losses_b").get<std::vector<double>>(), 1)
              .p_value < 0.01);
}

TEST_CASE("dm test edge cases") {
    const auto l = testing::normals(50, 3);
    std::vector<double> sq;
    for (double x : l) sq.push_back(x * x);
    const auto self = metrics::dm_test(sq, sq, 1);
    CHECK(self.statistic == 0.0);
    CHECK(self.p_value == 1.0);
    CHECK_FALSE(self.reject_at_5pct);
    CHECK_THROWS_AS(metrics::dm_test(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), Error);
    std::vector<double> shifted(sq);
    for (auto& x : shifted) x += 1.0;
    try {
        metrics::dm_test(sq, shifted, 1);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Degenerate);
    }
}

TEST_CASE("schema matching") {
    const auto s = metrics::scores_from_counts(2, 1, 1);
    CHECK(s.precision == doctest::Approx(2.0 / 3));
    CHECK(s.recall == doctest::Approx(2.0 / 3));
    CHECK(s.f1 == doctest::Approx(2.0 / 3));

    const std::vector<metrics::SchemaCluster> gold{{"c1", {{"died", {"cameraman"}}, {"fired", {"American tank"}}}}};
    const std::vector<metrics::SchemaCluster> none{{"c1", {}}};
    const auto empty = metrics::schema_match_eval(none, gold);
    CHECK(empty.precision == 0.0);
    CHECK(empty.recall == 0.0);
    CHECK(empty.f1 == 0.0);
    const auto same = metrics::schema_match_eval(gold, gold);
    CHECK(same.precision == 1.0);
    CHECK(same.recall == 1.0);
    CHECK(same.f1 == 1.0);

    const std::vector<metrics::SchemaCluster> pred{{"c1", {{"Died", {"cameraman"}}, {"exploded", {"bomb"}}}}};
    const auto mixed = metrics::schema_match_eval(pred, gold);
    CHECK(mixed.tp == 1);
    CHECK(mixed.fp == 1);
    CHECK(mixed.fn == 1);
}

TEST_CASE("config parsing") {
    const std::filesystem::path base = "/data/run";
    const auto c = ExperimentConfig::from_json(nlohmann::json::parse(R"({"prices": "p.csv"})"), base);
    CHECK(c.prices == base / "p.csv");
    CHECK(c.output_dir == base / "out");
    CHECK(c.seeds.size() == 5);
    CHECK(c.models == kAllModels);
    CHECK(c.odee.beta1 == 0.8);
    CHECK(c.direction_rule == metrics::DirectionRule::AsWritten);
    CHECK(c.agesl_init == AgeslInit::Lstm);

    const auto round = ExperimentConfig::from_json(c.to_json(), base);
    CHECK(round.prices == c.prices);
    CHECK(round.lstm.hidden == c.lstm.hidden);

    const auto bad = [&](const char* text) {
        try {
            ExperimentConfig::from_json(nlohmann::json::parse(text), base);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::Config;
        }
        return false;
    };
    CHECK(bad(R"({})"));
    CHECK(bad(R"({"prices": "p.csv", "models": ["SVM"]})"));
    CHECK(bad(R"({"prices": "p.csv", "seeds": []})"));
    CHECK(bad(R"({"prices": "p.csv", "direction_rule": "sideways"})"));
    CHECK(bad(R"({"prices": "p.csv", "agesl_init": "garch"})"));
    CHECK(bad(R"({"prices": "p.csv", "lstm": {"window": "long"}})"));
}

TEST_CASE("small experiment end to end") {
    const auto config = tiny_config(tiny_corpus());
    const auto r1 = run_experiment(config);
    REQUIRE(r1.summaries.size() == kAllModels.size());
    for (const auto& s : r1.summaries) {
        CAPTURE(s.model);
        REQUIRE(s.ok_runs == 1);
        CHECK(s.mean.rmse >= 0.0);
        CHECK(s.mean.ds >= 0.0);
        CHECK(s.mean.ds <= 1.0);
        CHECK(s.mean_predictions.size() == r1.actuals.size());
    }
    for (const auto& e : r1.dm) {
        if (e.a == e.b) CHECK(e.report.statistic == 0.0);
    }

    SUBCASE("identical config and seed reproduce the run") {
        const auto r2 = run_experiment(config);
        CHECK(r2.split == r1.split);
        for (std::size_t i = 0; i < r1.summaries.size(); ++i) {
            CHECK(r2.summaries[i].mean.rmse == r1.summaries[i].mean.rmse);
            CHECK(r2.summaries[i].mean_predictions == r1.summaries[i].mean_predictions);
        }
    }

    SUBCASE("outputs") {
        const auto out = testing::scratch_dir("tiny-out");
        write_outputs(r1, out);
        for (const auto* f : {"metrics.csv", "summary.csv", "predictions.csv", "dm.csv", "report.json"}) {
            CHECK(std::filesystem::exists(out / f));
        }
        std::ifstream in(out / "predictions.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header.rfind("date,actual,ARIMA", 0) == 0);
    }
}

TEST_CASE("identity-initialized AGESL reproduces ARIMA in the pipeline") {
    auto config = tiny_config(tiny_corpus());
    config.models = {"ARIMA", "AGESL"};
    config.agesl_init = AgeslInit::Arima;
    config.fusion.epochs = 0;
    config.lstm.epochs = 0;
    const auto r = run_experiment(config);
    const auto& arima = r.summary("ARIMA")->mean_predictions;
    const auto& agesl = r.summary("AGESL")->mean_predictions;
    REQUIRE(arima.size() == agesl.size());
    for (std::size_t i = 0; i < arima.size(); ++i) CHECK(std::abs(arima[i] - agesl[i]) <= 1e-12 * std::abs(arima[i]));
}

TEST_CASE("a failing model does not stop the others") {
    auto config = tiny_config(tiny_corpus());
    config.models = {"ARIMA", "LSTM"};
    config.lstm.lr = 1e9;
    config.lstm.clip_norm = 1e12;
    const auto r = run_experiment(config);
    CHECK(r.summary("ARIMA")->ok_runs == 1);
    CHECK(r.summary("LSTM")->ok_runs == 0);
    CHECK_FALSE(r.summary("LSTM")->errors.empty());
}
