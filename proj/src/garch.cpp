#include "agesl/garch.hpp"
#include "agesl/error.hpp"
#include "agesl/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

namespace agesl::garch {

double GarchModel::persistence() const noexcept {
    return std::accumulate(alpha.begin(), alpha.end(), 0.0) + std::accumulate(beta.begin(), beta.end(), 0.0);
}

double GarchModel::unconditional_variance() const noexcept {
    const double p = persistence();
    return p < 1.0 ? alpha0 / (1.0 - p) : std::numeric_limits<double>::infinity();
}

stats::TestReport lm_arch_test(std::span<const double> residuals, int lags) {
    if (lags < 1) throw Error(ErrorKind::Range, "lm_arch_test: lags must be positive");
    if (residuals.size() <= static_cast<std::size_t>(2 * lags + 1)) {
        throw Error(ErrorKind::InsufficientData, "lm_arch_test: need more than 2*lags+1 residuals");
    }
    const auto L = static_cast<std::size_t>(lags);
    const std::size_t rows = residuals.size() - L;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), lags + 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + L;
        const auto row = static_cast<Eigen::Index>(r);
        x(row, 0) = 1.0;
        for (std::size_t l = 1; l <= L; ++l) x(row, static_cast<Eigen::Index>(l)) = residuals[t - l] * residuals[t - l];
        y(row) = residuals[t] * residuals[t];
    }
    const auto fit = stats::ols(x, y);
    const double lm = static_cast<double>(rows) * fit.r_squared;
    return stats::make_report(lm, stats::chi_square_sf(lm, lags), lags);
}

namespace {

struct Params {
    double alpha0;
    std::vector<double> alpha, beta;
};

// x = (log alpha0, z_1..z_{m+s}); the ARCH/GARCH weights are a softmax with
// an implicit zero logit, which keeps every weight positive and their sum
// below one.
Params unpack(const Eigen::VectorXd& x, int m, int s) {
    Params p;
    p.alpha0 = std::exp(x(0));
    const auto k = static_cast<Eigen::Index>(m + s);
    const double mx = std::max(0.0, x.tail(k).maxCoeff());
    double denom = std::exp(-mx);
    for (Eigen::Index i = 1; i <= k; ++i) denom += std::exp(x(i) - mx);
    for (int i = 0; i < m; ++i) p.alpha.push_back(std::exp(x(1 + i) - mx) / denom);
    for (int j = 0; j < s; ++j) p.beta.push_back(std::exp(x(1 + m + j) - mx) / denom);
    return p;
}

// Conditional variances for t = 0..n and the Gaussian log-likelihood over
// t = 0..n-1.
double filter(const Params& p, std::span<const double> a, double presample, std::vector<double>* path) {
    const std::size_t n = a.size();
    const std::size_t m = p.alpha.size(), s = p.beta.size();
    std::vector<double> s2(n + 1);
    double ll = 0.0;
    for (std::size_t t = 0; t <= n; ++t) {
        double v = p.alpha0;
        for (std::size_t i = 0; i < m; ++i) v += p.alpha[i] * (t > i ? a[t - i - 1] * a[t - i - 1] : presample);
        for (std::size_t j = 0; j < s; ++j) v += p.beta[j] * (t > j ? s2[t - j - 1] : presample);
        s2[t] = v;
        if (t < n) ll -= 0.5 * (std::log(2.0 * std::numbers::pi) + std::log(v) + a[t] * a[t] / v);
    }
    if (path) *path = std::move(s2);
    return ll;
}

double mean_square(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) acc += v * v;
    return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

}  // namespace

GarchModel fit(std::span<const double> residuals, int m, int s, const FitOptions& options) {
    if (m < 1 || s < 0) throw Error(ErrorKind::Range, "garch fit: require m >= 1 and s >= 0");
    if (residuals.size() < 100) throw Error(ErrorKind::InsufficientData, "garch fit: need at least 100 residuals");
    const double var = mean_square(residuals);
    if (!(var > 0.0)) throw Error(ErrorKind::Degenerate, "garch fit: residuals have zero variance");
    for (double v : residuals) {
        if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "garch fit: non-finite residual");
    }

    // Work on unit-variance residuals so the optimiser sees the same
    // landscape regardless of scale; alpha0 is rescaled afterwards.
    std::vector<double> z(residuals.size());
    const double sd = std::sqrt(var);
    std::transform(residuals.begin(), residuals.end(), z.begin(), [sd](double v) { return v / sd; });

    const int k = m + s;
    Eigen::VectorXd x0(1 + k);
    const double a_tot = 0.1, b_tot = s > 0 ? 0.8 : 0.0;
    const double rest = 1.0 - a_tot - b_tot;
    x0(0) = std::log(rest);
    for (int i = 0; i < m; ++i) x0(1 + i) = std::log(a_tot / m / rest);
    for (int j = 0; j < s; ++j) x0(1 + m + j) = std::log(b_tot / s / rest);

    auto objective = [&](const Eigen::VectorXd& x) {
        if (!x.allFinite() || x.tail(k).maxCoeff() > 40.0 || std::abs(x(0)) > 40.0) {
            return std::numeric_limits<double>::infinity();
        }
        const double ll = filter(unpack(x, m, s), z, 1.0, nullptr);
        return std::isfinite(ll) ? -ll / static_cast<double>(z.size()) : std::numeric_limits<double>::infinity();
    };
    optim::BfgsOptions bo;
    bo.max_iter = options.max_iter;
    bo.grad_tol = 1e-8;
    const auto res = optim::minimize_bfgs(objective, x0, bo);
    if (!res.converged || !std::isfinite(res.f)) {
        const Params best = unpack(res.x, m, s);
        std::vector<double> flat{best.alpha0 * var};
        flat.insert(flat.end(), best.alpha.begin(), best.alpha.end());
        flat.insert(flat.end(), best.beta.begin(), best.beta.end());
        throw OptimizationError("garch fit: optimizer did not converge", std::move(flat), res.f, res.iterations);
    }

    Params p = unpack(res.x, m, s);
    GarchModel model;
    const double total = std::accumulate(p.alpha.begin(), p.alpha.end(), 0.0) +
                         std::accumulate(p.beta.begin(), p.beta.end(), 0.0);
    constexpr double kMaxPersistence = 1.0 - 1e-6;
    if (total >= kMaxPersistence) {
        const double shrink = kMaxPersistence / total;
        for (double& v : p.alpha) v *= shrink;
        for (double& v : p.beta) v *= shrink;
        model.projected = true;
    }
    p.alpha0 *= var;
    model.alpha0 = p.alpha0;
    model.alpha = p.alpha;
    model.beta = p.beta;
    model.loglik = filter(p, residuals, var, &model.sigma2_path);
    model.sigma2_path.pop_back();
    const double n = static_cast<double>(residuals.size());
    model.aic = -2.0 * model.loglik + 2.0 * (1 + k);
    model.bic = -2.0 * model.loglik + std::log(n) * (1 + k);
    model.iterations = res.iterations;
    return model;
}

GarchModel fit_best(std::span<const double> residuals) {
    std::optional<GarchModel> best;
    std::optional<Error> last_error;
    for (int m = 1; m <= 2; ++m) {
        for (int s = 1; s <= 2; ++s) {
            try {
                GarchModel g = fit(residuals, m, s);
                if (!best || g.bic < best->bic) best = std::move(g);
            } catch (const Error& e) {
                last_error = e;
            }
        }
    }
    if (!best) throw *last_error;
    return *best;
}

std::vector<double> forecast_variance(const GarchModel& model, std::span<const double> resid2_history,
                                      std::span<const double> sigma2_history, int horizon) {
    if (horizon < 1) throw Error(ErrorKind::Range, "forecast_variance: horizon must be at least 1");
    if (resid2_history.empty() || sigma2_history.empty()) {
        throw Error(ErrorKind::InsufficientData, "forecast_variance: empty history");
    }
    for (double v : resid2_history) {
        if (v < 0.0) throw Error(ErrorKind::Range, "forecast_variance: squared residuals must be nonnegative");
    }
    for (double v : sigma2_history) {
        if (v < 0.0) throw Error(ErrorKind::Range, "forecast_variance: variances must be nonnegative");
    }
    const std::size_t m = model.alpha.size(), s = model.beta.size();
    const std::size_t depth = std::max<std::size_t>({m, s, 1});
    // Most recent last, padded at the front to `depth` entries.
    auto padded = [depth](std::span<const double> h) {
        std::vector<double> v;
        if (h.size() < depth) v.assign(depth - h.size(), h.front());
        v.insert(v.end(), h.size() > depth ? h.end() - static_cast<std::ptrdiff_t>(depth) : h.begin(), h.end());
        return v;
    };
    std::vector<double> a2 = padded(resid2_history);
    std::vector<double> s2 = padded(sigma2_history);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        double v = model.alpha0;
        for (std::size_t i = 0; i < m; ++i) v += model.alpha[i] * a2[a2.size() - 1 - i];
        for (std::size_t j = 0; j < s; ++j) v += model.beta[j] * s2[s2.size() - 1 - j];
        out.push_back(v);
        a2.push_back(v);  // E[a^2] = sigma^2 beyond the first step
        s2.push_back(v);
    }
    return out;
}

std::vector<double> forecast_variance(const GarchModel& model, double last_resid2, double last_sigma2, int horizon) {
    const double a[] = {last_resid2};
    const double s[] = {last_sigma2};
    return forecast_variance(model, a, s, horizon);
}

std::vector<double> conditional_variances(const GarchModel& model, std::span<const double> residuals) {
    std::vector<double> path;
    filter({model.alpha0, model.alpha, model.beta}, residuals, mean_square(residuals), &path);
    return path;
}

namespace {

void check_rolling(std::span<const double> residuals, std::size_t start, const RollingOptions& o) {
    if (o.refit_every < 1) throw Error(ErrorKind::Range, "rolling variance: refit_every must be positive");
    if (start < 100 || start > residuals.size()) {
        throw Error(ErrorKind::Range, "rolling variance: start must leave at least 100 training residuals");
    }
}

}  // namespace

RollingVariance rolling_variance(std::span<const double> residuals, std::size_t start, const RollingOptions& o) {
    check_rolling(residuals, start, o);
    RollingVariance r;
    r.variances.assign(residuals.size(), std::numeric_limits<double>::quiet_NaN());
    const auto k = static_cast<std::size_t>(o.refit_every);
    const auto blocks = static_cast<std::int64_t>((residuals.size() - start + k - 1) / k);
    int failed = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : failed)
    for (std::int64_t b = 0; b < blocks; ++b) {
        const std::size_t begin = start + static_cast<std::size_t>(b) * k;
        const std::size_t end = std::min(residuals.size(), begin + k);
        try {
            const GarchModel g = fit(residuals.first(begin), o.m, o.s);
            // Filter with the training-sample pre-sample value so the path
            // matches the fitted one up to `begin`.
            std::vector<double> path;
            filter({g.alpha0, g.alpha, g.beta}, residuals.first(end - 1), mean_square(residuals.first(begin)), &path);
            for (std::size_t t = begin; t < end; ++t) r.variances[t] = path[t];
        } catch (const Error&) {
            ++failed;
            const double v = mean_square(residuals.first(begin));
            for (std::size_t t = begin; t < end; ++t) r.variances[t] = v;
        }
    }
    r.refits = static_cast<int>(blocks);
    r.failed_refits = failed;
    return r;
}

RollingVariance rolling_variance_serial(std::span<const double> residuals, std::size_t start, const RollingOptions& o) {
    check_rolling(residuals, start, o);
    RollingVariance r;
    r.variances.assign(residuals.size(), std::numeric_limits<double>::quiet_NaN());
    std::optional<GarchModel> g;
    double presample = 0.0;
    std::vector<double> path;
    for (std::size_t t = start; t < residuals.size(); ++t) {
        if ((t - start) % static_cast<std::size_t>(o.refit_every) == 0) {
            ++r.refits;
            presample = mean_square(residuals.first(t));
            try {
                g = fit(residuals.first(t), o.m, o.s);
            } catch (const Error&) {
                g.reset();
                ++r.failed_refits;
            }
        }
        if (g) {
            filter({g->alpha0, g->alpha, g->beta}, residuals.first(t), presample, &path);
            r.variances[t] = path[t];
        } else {
            r.variances[t] = presample;
        }
    }
    return r;
}

std::vector<double> simulate(double alpha0, std::span<const double> alpha, std::span<const double> beta, std::size_t n,
                             std::mt19937_64& rng, std::size_t burn_in) {
    std::normal_distribution<double> u(0.0, 1.0);
    double total = 0.0;
    for (double v : alpha) total += v;
    for (double v : beta) total += v;
    const double uncond = total < 1.0 ? alpha0 / (1.0 - total) : alpha0;
    std::vector<double> a, s2;
    a.reserve(n + burn_in);
    s2.reserve(n + burn_in);
    for (std::size_t t = 0; t < n + burn_in; ++t) {
        double v = alpha0;
        for (std::size_t i = 0; i < alpha.size(); ++i) v += alpha[i] * (t > i ? a[t - i - 1] * a[t - i - 1] : uncond);
        for (std::size_t j = 0; j < beta.size(); ++j) v += beta[j] * (t > j ? s2[t - j - 1] : uncond);
        s2.push_back(v);
        a.push_back(std::sqrt(v) * u(rng));
    }
    return {a.begin() + static_cast<std::ptrdiff_t>(burn_in), a.end()};
}

nlohmann::json to_json(const GarchModel& g) {
    return {
        {"format", "agesl.garch"}, {"version", 1},     {"alpha0", g.alpha0}, {"alpha", g.alpha},
        {"beta", g.beta},          {"loglik", g.loglik}, {"aic", g.aic},       {"bic", g.bic},
        {"projected", g.projected},
    };
}

GarchModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format") != "agesl.garch" || doc.at("version") != 1) {
            throw Error(ErrorKind::Parse, "garch model: unsupported document format or version");
        }
        GarchModel g;
        g.alpha0 = doc.at("alpha0");
        g.alpha = doc.at("alpha").get<std::vector<double>>();
        g.beta = doc.at("beta").get<std::vector<double>>();
        g.loglik = doc.value("loglik", 0.0);
        g.aic = doc.value("aic", 0.0);
        g.bic = doc.value("bic", 0.0);
        g.projected = doc.value("projected", false);
        if (!(g.alpha0 > 0.0) || g.alpha.empty()) throw Error(ErrorKind::Parse, "garch model: invalid parameters");
        return g;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("garch model: ") + e.what());
    }
}

}  // namespace agesl::garch
