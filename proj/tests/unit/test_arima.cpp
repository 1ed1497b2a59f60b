#include "common.hpp"

#include "agesl/arima.hpp"
#include "agesl/error.hpp"
#include "agesl/stats.hpp"

#include <cmath>

using namespace agesl;

namespace {

arima::ArimaModel hand_model(std::vector<double> ar, std::vector<double> ma, double c = 0.0, int d = 0) {
    arima::ArimaModel m;
    m.spec = {static_cast<int>(ar.size()), d, static_cast<int>(ma.size())};
    m.intercept = c;
    m.ar = std::move(ar);
    m.ma = std::move(ma);
    m.sigma2 = 1.0;
    return m;
}

std::vector<double> simulate(std::vector<double> ar, std::vector<double> ma, std::size_t n, std::uint64_t seed,
                             double c = 0.0) {
    std::mt19937_64 rng(seed);
    return arima::simulate(c, ar, ma, 1.0, n, rng);
}

}  // namespace

TEST_CASE("AR(1) recovery") {
    const auto x = simulate({0.6}, {}, 2000, 101);
    const auto m = arima::fit(x, {1, 0, 0});
    CHECK(m.ar[0] >= 0.5);
    CHECK(m.ar[0] <= 0.7);
    CHECK(m.sigma2 > 0.0);
    CHECK(m.residuals.size() == x.size());
    CHECK(m.std_errors.size() == 2);
}

TEST_CASE("MA(1) recovery") {
    const auto x = simulate({}, {0.4}, 2000, 102);
    const auto m = arima::fit(x, {0, 0, 1});
    CHECK(m.ma[0] >= 0.3);
    CHECK(m.ma[0] <= 0.5);
}

TEST_CASE("fit preconditions") {
    CHECK_THROWS_AS(arima::fit(std::vector<double>{}, {1, 0, 0}), Error);
    CHECK_THROWS_AS(arima::fit(std::vector<double>(200, 3.0), {1, 0, 0}), Error);
    CHECK_THROWS_AS(arima::fit(testing::normals(20, 1), {2, 0, 1}), Error);
    CHECK_THROWS_AS(arima::fit(testing::normals(500, 1), {-1, 0, 0}), Error);
}

TEST_CASE("fitted models are stationary and invertible with populated criteria") {
    const auto x = simulate({0.5, -0.2}, {0.3}, 1500, 103, 0.4);
    const auto m = arima::fit(x, {2, 0, 1});
    CHECK(arima::is_stationary(m.ar));
    CHECK(arima::is_invertible(m.ma));
    CHECK(std::isfinite(m.loglik));
    CHECK(m.aic == doctest::Approx(-2 * m.loglik + 2 * 5));
    CHECK(m.bic > m.aic);
    CHECK(m.intercept == doctest::Approx(0.4).epsilon(0.3));
}

TEST_CASE("root checks") {
    CHECK(arima::is_stationary(std::vector<double>{0.5}));
    CHECK_FALSE(arima::is_stationary(std::vector<double>{1.0}));
    CHECK_FALSE(arima::is_stationary(std::vector<double>{0.5, 0.6}));
    CHECK(arima::is_invertible(std::vector<double>{-0.9}));
    CHECK_FALSE(arima::is_invertible(std::vector<double>{1.2}));
}

TEST_CASE("in-sample residual mean vanishes for a well-specified model") {
    const auto x = simulate({0.7}, {}, 3000, 104, 1.0);
    const auto m = arima::fit(x, {1, 0, 0});
    const std::span<const double> r(m.residuals.data() + 1, m.residuals.size() - 1);
    CHECK(std::abs(stats::mean(r)) < 3.0 * std::sqrt(m.sigma2) / std::sqrt(static_cast<double>(r.size())));
}

TEST_CASE("refitting a simulated fitted model recovers it within two standard errors") {
    const auto x = simulate({0.5}, {0.3}, 1500, 105);
    const auto base = arima::fit(x, {1, 0, 1});
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const auto y = simulate(base.ar, base.ma, 1500, 200 + seed, base.intercept);
        const auto m = arima::fit(y, {1, 0, 1});
        const bool ok = std::abs(m.ar[0] - base.ar[0]) < 2 * m.std_errors[1] &&
                        std::abs(m.ma[0] - base.ma[0]) < 2 * m.std_errors[2];
        hits += ok ? 1 : 0;
    }
    CHECK(hits >= 32);
}

TEST_CASE("forecast examples") {
    const auto ar = hand_model({0.5}, {});
    const auto f = arima::forecast_differenced(ar, std::vector<double>{2.0}, 2);
    CHECK(f[0] == doctest::Approx(1.0));
    CHECK(f[1] == doctest::Approx(0.5));

    const auto flat = hand_model({0.0}, {0.0}, 3.0);
    for (double v : arima::forecast_differenced(flat, std::vector<double>{1, 2, 3}, 5)) CHECK(v == doctest::Approx(3.0));

    CHECK_THROWS_AS(arima::forecast(ar, std::vector<double>{1, 2}, 0), Error);
}

TEST_CASE("forecast on the original scale integrates the differenced forecast") {
    const auto m = hand_model({0.5}, {}, 0.0, 1);
    const std::vector<double> history{10, 12};  // last difference 2
    const auto f = arima::forecast(m, history, 2);
    CHECK(f[0] == doctest::Approx(13.0));
    CHECK(f[1] == doctest::Approx(13.5));
}

TEST_CASE("one-step forecasts with d >= 1 ignore the level") {
    const auto w = simulate({0.4}, {0.2}, 400, 106);
    std::vector<double> x(w.size());
    double level = 50.0;
    for (std::size_t i = 0; i < w.size(); ++i) x[i] = level += w[i];
    const auto m = arima::fit(x, {1, 1, 1});
    std::vector<double> shifted(x);
    for (auto& v : shifted) v += 123.0;
    const auto a = arima::one_step_predictions(m, x);
    const auto b = arima::one_step_predictions(m, shifted);
    CHECK(std::isnan(a[0]));
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(b[i] - a[i] == doctest::Approx(123.0).epsilon(1e-9));
    CHECK(arima::forecast(m, shifted, 1)[0] - arima::forecast(m, x, 1)[0] == doctest::Approx(123.0).epsilon(1e-9));
}

TEST_CASE("one-step predictions follow the ARMA recursion") {
    const auto m = hand_model({0.5}, {0.25}, 0.1);
    const std::vector<double> x{1.0, 2.0, 0.5, -1.0};
    const auto p = arima::one_step_predictions(m, x);
    // e_0 = 0 (pre-sample), then recursion
    double e_prev = 0.0;
    for (std::size_t t = 1; t < x.size(); ++t) {
        const double expected = 0.1 + 0.5 * x[t - 1] + 0.25 * e_prev;
        CHECK(p[t] == doctest::Approx(expected));
        e_prev = x[t] - expected;
    }
}

TEST_CASE("order selection") {
    const auto ar2 = simulate({0.5, 0.3}, {}, 1500, 107);
    const auto s = arima::select_order(ar2, 3, 3);
    CHECK(s.d == 0);
    CHECK(s.p >= 1);
    CHECK(s.p <= 3);

    CHECK(arima::select_order(testing::random_walk(800, 108), 2, 2).d == 1);

    const auto wn = arima::select_order(testing::normals(800, 109), 2, 2);
    CHECK(wn.d == 0);
    CHECK(wn.intercept_only());
}

TEST_CASE("rolling forecast layout") {
    const auto x = testing::random_walk(300, 110);
    const auto r = arima::rolling_forecast(x, {1, 1, 0}, 250, {20});
    REQUIRE(r.predictions.size() == x.size());
    CHECK(std::isnan(r.predictions[249]));
    for (std::size_t i = 250; i < 300; ++i) CHECK(std::isfinite(r.predictions[i]));
    CHECK(r.refits == 3);
    CHECK(r.failed_refits == 0);
}

TEST_CASE("model json round trip") {
    const auto m = arima::fit(simulate({0.3}, {0.2}, 600, 111), {1, 0, 1});
    const auto j = arima::to_json(m);
    const auto back = arima::model_from_json(j);
    CHECK(back.spec == m.spec);
    CHECK(back.ar == m.ar);
    CHECK(back.ma == m.ma);
    CHECK(back.intercept == m.intercept);
    CHECK(back.sigma2 == m.sigma2);
    CHECK(j.contains("version"));
}
