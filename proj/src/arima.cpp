#include "agesl/arima.hpp"
#include "agesl/error.hpp"
#include "agesl/optimize.hpp"
#include "agesl/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace agesl::arima {

void ArimaSpec::validate() const {
    if (p < 0 || d < 0 || q < 0) throw Error(ErrorKind::Range, "arima: orders must be nonnegative");
    if (p > 10 || q > 10 || d > 2) throw Error(ErrorKind::Range, "arima: orders out of supported range");
}

namespace {

// Maps unconstrained reals to the coefficients of a stationary AR polynomial
// through partial autocorrelations in (-1, 1).
std::vector<double> pacf_to_coeffs(std::span<const double> raw) {
    const std::size_t p = raw.size();
    std::vector<double> out(p), work(p);
    for (std::size_t j = 0; j < p; ++j) work[j] = out[j] = std::tanh(raw[j]);
    for (std::size_t j = 1; j < p; ++j) {
        const double a = out[j];
        for (std::size_t k = 0; k < j; ++k) work[k] -= a * out[j - k - 1];
        for (std::size_t k = 0; k < j; ++k) out[k] = work[k];
    }
    return out;
}

std::vector<double> coeffs_to_pacf_raw(std::span<const double> phi) {
    const std::size_t p = phi.size();
    std::vector<double> out(phi.begin(), phi.end()), work(p);
    for (std::size_t j = p; j-- > 1;) {
        const double a = out[j];
        for (std::size_t k = 0; k < j; ++k) work[k] = (out[k] + a * out[j - k - 1]) / (1.0 - a * a);
        for (std::size_t k = 0; k < j; ++k) out[k] = work[k];
    }
    for (double& v : out) v = std::atanh(std::clamp(v, -0.98, 0.98));
    return out;
}

bool roots_outside(std::span<const double> coeffs, double sign) {
    // Companion matrix of 1 - sum (sign * coeffs_i) z^i; eigenvalues are the
    // inverse roots.
    const auto p = static_cast<Eigen::Index>(coeffs.size());
    while (!coeffs.empty() && coeffs.back() == 0.0) coeffs = coeffs.first(coeffs.size() - 1);
    if (coeffs.empty()) return true;
    const auto m = static_cast<Eigen::Index>(coeffs.size());
    (void)p;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) comp(0, i) = sign * coeffs[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < m; ++i) comp(i, i - 1) = 1.0;
    const Eigen::VectorXcd ev = comp.eigenvalues();
    return ev.cwiseAbs().maxCoeff() < 1.0;
}

struct Coefficients {
    double c = 0.0;
    std::vector<double> ar, ma;
};

// Conditional residuals with zero pre-sample innovations; returns SSE over
// t >= p.
double css(const Coefficients& k, std::span<const double> w, std::vector<double>* resid) {
    const std::size_t n = w.size();
    const std::size_t p = k.ar.size(), q = k.ma.size();
    std::vector<double> e(n, 0.0);
    double sse = 0.0;
    for (std::size_t t = p; t < n; ++t) {
        double pred = k.c;
        for (std::size_t i = 0; i < p; ++i) pred += k.ar[i] * w[t - i - 1];
        for (std::size_t j = 0; j < q && j < t; ++j) pred += k.ma[j] * e[t - j - 1];
        e[t] = w[t] - pred;
        sse += e[t] * e[t];
    }
    if (resid) *resid = std::move(e);
    return sse;
}

Coefficients unpack_raw(const Eigen::VectorXd& x, const ArimaSpec& s, double scale) {
    Coefficients k;
    k.c = x(0) * scale;
    std::vector<double> raw_ar(x.data() + 1, x.data() + 1 + s.p);
    std::vector<double> raw_ma(x.data() + 1 + s.p, x.data() + 1 + s.p + s.q);
    k.ar = pacf_to_coeffs(raw_ar);
    k.ma = pacf_to_coeffs(raw_ma);
    for (double& v : k.ma) v = -v;
    return k;
}

Coefficients unpack_natural(const Eigen::VectorXd& x, const ArimaSpec& s) {
    Coefficients k;
    k.c = x(0);
    k.ar.assign(x.data() + 1, x.data() + 1 + s.p);
    k.ma.assign(x.data() + 1 + s.p, x.data() + 1 + s.p + s.q);
    return k;
}

// Hannan-Rissanen style starting values: long autoregression for proxy
// innovations, then least squares on lagged values and proxies.
Coefficients initial_values(std::span<const double> w, const ArimaSpec& s) {
    Coefficients k;
    k.ar.assign(static_cast<std::size_t>(s.p), 0.0);
    k.ma.assign(static_cast<std::size_t>(s.q), 0.0);
    k.c = stats::mean(w);
    const std::size_t n = w.size();
    if (s.intercept_only()) return k;

    const std::size_t m = std::min<std::size_t>(n / 4, static_cast<std::size_t>(std::max(s.p, s.q) + 8));
    std::vector<double> proxy(n, 0.0);
    if (s.q > 0 && n > 3 * m + 10) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n - m), static_cast<Eigen::Index>(m + 1));
        Eigen::VectorXd y(static_cast<Eigen::Index>(n - m));
        for (std::size_t t = m; t < n; ++t) {
            const auto r = static_cast<Eigen::Index>(t - m);
            x(r, 0) = 1.0;
            for (std::size_t i = 1; i <= m; ++i) x(r, static_cast<Eigen::Index>(i)) = w[t - i];
            y(r) = w[t];
        }
        const auto longar = stats::ols(x, y);
        for (std::size_t t = m; t < n; ++t) proxy[t] = longar.residuals(static_cast<Eigen::Index>(t - m));
    }
    const std::size_t start = m + static_cast<std::size_t>(std::max(s.p, s.q));
    if (n <= start + static_cast<std::size_t>(s.p + s.q) + 5) return k;
    const auto cols = static_cast<Eigen::Index>(1 + s.p + s.q);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n - start), cols);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n - start));
    for (std::size_t t = start; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t - start);
        x(r, 0) = 1.0;
        for (int i = 1; i <= s.p; ++i) x(r, i) = w[t - static_cast<std::size_t>(i)];
        for (int j = 1; j <= s.q; ++j) x(r, s.p + j) = proxy[t - static_cast<std::size_t>(j)];
        y(r) = w[t];
    }
    const auto hr = stats::ols(x, y);
    k.c = hr.coef(0);
    for (int i = 0; i < s.p; ++i) k.ar[static_cast<std::size_t>(i)] = hr.coef(1 + i);
    for (int j = 0; j < s.q; ++j) k.ma[static_cast<std::size_t>(j)] = hr.coef(1 + s.p + j);
    if (!is_stationary(k.ar)) std::fill(k.ar.begin(), k.ar.end(), 0.0);
    if (!is_invertible(k.ma)) std::fill(k.ma.begin(), k.ma.end(), 0.0);
    if (!std::isfinite(k.c)) k.c = stats::mean(w);
    return k;
}

double level_offset(std::span<const double> y, std::size_t t, int d) {
    // y_t - (d-th difference of y at t), built from y_{t-1}, ..., y_{t-d}.
    switch (d) {
        case 0: return 0.0;
        case 1: return y[t - 1];
        default: return 2.0 * y[t - 1] - y[t - 2];
    }
}

}  // namespace

bool is_stationary(std::span<const double> ar) { return roots_outside(ar, 1.0); }
bool is_invertible(std::span<const double> ma) { return roots_outside(ma, -1.0); }

ArimaModel fit(std::span<const double> series, const ArimaSpec& spec, const FitOptions& options) {
    spec.validate();
    if (series.size() <= static_cast<std::size_t>(spec.d)) {
        throw Error(ErrorKind::InsufficientData, "arima fit: series too short for the differencing order");
    }
    const std::vector<double> w = ts::difference(series, spec.d);
    const std::size_t n = w.size();
    if (n <= static_cast<std::size_t>(10 * (spec.p + spec.q + 1))) {
        throw Error(ErrorKind::InsufficientData, "arima fit: need more than 10*(p+q+1) differenced observations");
    }
    const double var = stats::variance(w);
    if (!(var > 0.0)) throw Error(ErrorKind::Degenerate, "arima fit: differenced series is constant");
    const double scale = std::sqrt(var);

    const Coefficients init = initial_values(w, spec);
    Eigen::VectorXd x0(spec.num_coefficients());
    x0(0) = init.c / scale;
    {
        const auto ra = coeffs_to_pacf_raw(init.ar);
        std::vector<double> neg_ma(init.ma.size());
        for (std::size_t j = 0; j < neg_ma.size(); ++j) neg_ma[j] = -init.ma[j];
        const auto rm = coeffs_to_pacf_raw(neg_ma);
        for (int i = 0; i < spec.p; ++i) x0(1 + i) = ra[static_cast<std::size_t>(i)];
        for (int j = 0; j < spec.q; ++j) x0(1 + spec.p + j) = rm[static_cast<std::size_t>(j)];
    }

    const double n_eff = static_cast<double>(n - static_cast<std::size_t>(spec.p));
    auto objective = [&](const Eigen::VectorXd& x) {
        const double sse = css(unpack_raw(x, spec, scale), w, nullptr);
        if (!(sse > 0.0) || !std::isfinite(sse)) return std::numeric_limits<double>::infinity();
        return 0.5 * n_eff * std::log(sse / n_eff / var);
    };

    optim::BfgsOptions bo;
    bo.max_iter = options.max_iter;
    bo.grad_tol = 1e-7;
    const auto res = optim::minimize_bfgs(objective, x0, bo);
    if (!res.converged) {
        const Coefficients best = unpack_raw(res.x, spec, scale);
        std::vector<double> flat{best.c};
        flat.insert(flat.end(), best.ar.begin(), best.ar.end());
        flat.insert(flat.end(), best.ma.begin(), best.ma.end());
        throw OptimizationError("arima fit: optimizer did not converge", std::move(flat), res.f, res.iterations);
    }

    const Coefficients k = unpack_raw(res.x, spec, scale);
    ArimaModel m;
    m.spec = spec;
    m.intercept = k.c;
    m.ar = k.ar;
    m.ma = k.ma;
    const double sse = css(k, w, &m.residuals);
    m.sigma2 = sse / n_eff;
    m.loglik = -0.5 * n_eff * (std::log(2.0 * std::numbers::pi * m.sigma2) + 1.0);
    const double n_params = spec.num_coefficients() + 1.0;
    m.aic = -2.0 * m.loglik + 2.0 * n_params;
    m.bic = -2.0 * m.loglik + std::log(n_eff) * n_params;
    m.iterations = res.iterations;

    // Observed information of the Gaussian likelihood with sigma^2 held at
    // its estimate, in natural coefficients.
    Eigen::VectorXd nat(spec.num_coefficients());
    nat(0) = k.c;
    for (int i = 0; i < spec.p; ++i) nat(1 + i) = k.ar[static_cast<std::size_t>(i)];
    for (int j = 0; j < spec.q; ++j) nat(1 + spec.p + j) = k.ma[static_cast<std::size_t>(j)];
    auto half_sse = [&](const Eigen::VectorXd& v) { return 0.5 * css(unpack_natural(v, spec), w, nullptr) / m.sigma2; };
    const Eigen::MatrixXd info = optim::numeric_hessian(half_sse, nat, 1e-5);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(nat.size(), nat.size()));
    m.std_errors.resize(static_cast<std::size_t>(nat.size()));
    for (Eigen::Index i = 0; i < nat.size(); ++i) {
        m.std_errors[static_cast<std::size_t>(i)] = cov(i, i) > 0.0 ? std::sqrt(cov(i, i)) : std::nan("");
    }
    return m;
}

ArimaSpec select_order(std::span<const double> series, int max_p, int max_q) {
    if (max_p < 0 || max_q < 0 || max_p > 5 || max_q > 5) {
        throw Error(ErrorKind::Range, "select_order: grid bounds must lie in [0, 5]");
    }
    int d = 0;
    for (; d < 2; ++d) {
        try {
            const auto w = ts::difference(series, d);
            if (ts::adf_test(w).reject_at_5pct) break;
        } catch (const Error&) {
            break;
        }
    }

    ArimaSpec best{1, d, 1};
    double best_bic = std::numeric_limits<double>::infinity();
    bool any = false;
    for (int p = 0; p <= max_p; ++p) {
        for (int q = 0; q <= max_q; ++q) {
            const ArimaSpec s{p, d, q};
            try {
                const double bic = fit(series, s).bic;
                const bool better = bic < best_bic - 1e-9 ||
                                    (std::abs(bic - best_bic) <= 1e-9 &&
                                     (p + q < best.p + best.q || (p + q == best.p + best.q && p < best.p)));
                if (!any || better) {
                    best = s;
                    best_bic = bic;
                    any = true;
                }
            } catch (const Error&) {
            }
        }
    }
    if (!any) return ArimaSpec{1, d, 1};
    return best;
}

std::vector<double> filter_residuals(const ArimaModel& model, std::span<const double> w) {
    Coefficients k{model.intercept, model.ar, model.ma};
    std::vector<double> e;
    css(k, w, &e);
    return e;
}

std::vector<double> forecast_differenced(const ArimaModel& model, std::span<const double> w, int horizon) {
    if (horizon < 1) throw Error(ErrorKind::Range, "forecast: horizon must be at least 1");
    const std::size_t p = model.ar.size(), q = model.ma.size();
    if (w.size() < std::max<std::size_t>(p, 1)) {
        throw Error(ErrorKind::InsufficientData, "forecast: history too short to seed the AR lags");
    }
    std::vector<double> hist(w.begin(), w.end());
    std::vector<double> e = filter_residuals(model, w);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        const std::size_t t = hist.size();
        double v = model.intercept;
        for (std::size_t i = 0; i < p; ++i) v += model.ar[i] * hist[t - i - 1];
        for (std::size_t j = 0; j < q && j < t; ++j) v += model.ma[j] * e[t - j - 1];
        hist.push_back(v);
        e.push_back(0.0);
        out.push_back(v);
    }
    return out;
}

std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, int horizon) {
    const int d = model.spec.d;
    if (history.size() <= static_cast<std::size_t>(d)) {
        throw Error(ErrorKind::InsufficientData, "forecast: history shorter than differencing order");
    }
    const auto w = ts::difference(history, d);
    return ts::integrate(history, forecast_differenced(model, w, horizon), d);
}

std::vector<double> one_step_predictions(const ArimaModel& model, std::span<const double> y) {
    const int d = model.spec.d;
    const std::size_t n = y.size();
    std::vector<double> pred(n, std::numeric_limits<double>::quiet_NaN());
    if (n <= static_cast<std::size_t>(d)) return pred;
    const std::vector<double> w = ts::difference(y, d);
    const std::size_t p = model.ar.size(), q = model.ma.size();
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = 0; t < w.size(); ++t) {
        double v = model.intercept;
        for (std::size_t i = 0; i < p; ++i) v += t > i ? model.ar[i] * w[t - i - 1] : 0.0;
        for (std::size_t j = 0; j < q && j < t; ++j) v += model.ma[j] * e[t - j - 1];
        e[t] = t >= p ? w[t] - v : 0.0;
        const std::size_t yt = t + static_cast<std::size_t>(d);
        pred[yt] = v + level_offset(y, yt, d);
    }
    return pred;
}

namespace {

void fill_block(std::span<const double> series, const ArimaSpec& spec, std::size_t begin, std::size_t end,
                std::vector<double>& out, int& failed) {
    try {
        const ArimaModel m = fit(series.first(begin), spec);
        const auto pred = one_step_predictions(m, series.first(end));
        for (std::size_t t = begin; t < end; ++t) out[t] = pred[t];
    } catch (const Error&) {
        ++failed;
        for (std::size_t t = begin; t < end; ++t) out[t] = series[t - 1];
    }
}

void check_rolling(std::span<const double> series, std::size_t start, const RollingOptions& options) {
    if (options.refit_every < 1) throw Error(ErrorKind::Range, "rolling forecast: refit_every must be positive");
    if (start < 2 || start > series.size()) throw Error(ErrorKind::Range, "rolling forecast: start out of range");
}

}  // namespace

RollingForecast rolling_forecast(std::span<const double> series, const ArimaSpec& spec, std::size_t start,
                                 const RollingOptions& options) {
    check_rolling(series, start, options);
    RollingForecast r;
    r.predictions.assign(series.size(), std::numeric_limits<double>::quiet_NaN());
    const auto k = static_cast<std::size_t>(options.refit_every);
    const auto blocks = static_cast<std::int64_t>((series.size() - start + k - 1) / k);
    int failed = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : failed)
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::size_t begin = start + static_cast<std::size_t>(b) * k;
        const std::size_t end = std::min(series.size(), begin + k);
        fill_block(series, spec, begin, end, r.predictions, failed);
    }
    r.refits = static_cast<int>(blocks);
    r.failed_refits = failed;
    return r;
}

RollingForecast rolling_forecast_serial(std::span<const double> series, const ArimaSpec& spec, std::size_t start,
                                        const RollingOptions& options) {
    check_rolling(series, start, options);
    RollingForecast r;
    r.predictions.assign(series.size(), std::numeric_limits<double>::quiet_NaN());
    std::optional<ArimaModel> model;
    for (std::size_t t = start; t < series.size(); ++t) {
        if ((t - start) % static_cast<std::size_t>(options.refit_every) == 0) {
            ++r.refits;
            try {
                model = fit(series.first(t), spec);
            } catch (const Error&) {
                model.reset();
                ++r.failed_refits;
            }
        }
        if (model) {
            const auto w = ts::difference(series.first(t), spec.d);
            const double next = forecast_differenced(*model, w, 1)[0];
            r.predictions[t] = next + level_offset(series, t, spec.d);
        } else {
            r.predictions[t] = series[t - 1];
        }
    }
    return r;
}

std::vector<double> simulate(double intercept, std::span<const double> ar, std::span<const double> ma, double sigma2,
                             std::size_t n, std::mt19937_64& rng, std::size_t burn_in) {
    std::normal_distribution<double> noise(0.0, std::sqrt(sigma2));
    const std::size_t total = n + burn_in;
    std::vector<double> w(total, 0.0), e(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        e[t] = noise(rng);
        double v = intercept + e[t];
        for (std::size_t i = 0; i < ar.size() && i < t; ++i) v += ar[i] * w[t - i - 1];
        for (std::size_t j = 0; j < ma.size() && j < t; ++j) v += ma[j] * e[t - j - 1];
        w[t] = v;
    }
    return {w.begin() + static_cast<std::ptrdiff_t>(burn_in), w.end()};
}

nlohmann::json to_json(const ArimaModel& m) {
    return {
        {"format", "agesl.arima"},
        {"version", 1},
        {"spec", {{"p", m.spec.p}, {"d", m.spec.d}, {"q", m.spec.q}}},
        {"intercept", m.intercept},
        {"ar", m.ar},
        {"ma", m.ma},
        {"sigma2", m.sigma2},
        {"loglik", m.loglik},
        {"aic", m.aic},
        {"bic", m.bic},
        {"std_errors", m.std_errors},
    };
}

ArimaModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format") != "agesl.arima" || doc.at("version") != 1) {
            throw Error(ErrorKind::Parse, "arima model: unsupported document format or version");
        }
        ArimaModel m;
        m.spec = {doc.at("spec").at("p"), doc.at("spec").at("d"), doc.at("spec").at("q")};
        m.spec.validate();
        m.intercept = doc.at("intercept");
        m.ar = doc.at("ar").get<std::vector<double>>();
        m.ma = doc.at("ma").get<std::vector<double>>();
        m.sigma2 = doc.at("sigma2");
        m.loglik = doc.value("loglik", 0.0);
        m.aic = doc.value("aic", 0.0);
        m.bic = doc.value("bic", 0.0);
        m.std_errors = doc.value("std_errors", std::vector<double>{});
        if (m.ar.size() != static_cast<std::size_t>(m.spec.p) || m.ma.size() != static_cast<std::size_t>(m.spec.q)) {
            throw Error(ErrorKind::Parse, "arima model: coefficient count disagrees with spec");
        }
        if (!(m.sigma2 > 0.0)) throw Error(ErrorKind::Parse, "arima model: sigma2 must be positive");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("arima model: ") + e.what());
    }
}

}  // namespace agesl::arima
