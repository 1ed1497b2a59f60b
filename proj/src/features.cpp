#include "agesl/features.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace agesl::pipeline {

Eigen::VectorXd FeatureRow::concatenated() const {
    Eigen::VectorXd out(type_vec.size() + arg_embedding.size() + static_cast<Eigen::Index>(kNumLags));
    out << type_vec, arg_embedding, Eigen::Map<const Eigen::VectorXd>(price_lags.data(), kNumLags);
    return out;
}

std::vector<FeatureRow> build_features(const PriceSeries& prices,
                                       const std::map<Date, sentiment::SentimentVector>& sentiments,
                                       const std::map<Date, events::EventRecord>& events,
                                       std::span<const double> arima_mean, std::span<const double> garch_var,
                                       int type_dim, int arg_dim) {
    const std::size_t n = prices.size();
    if (n <= kNumLags) {
        throw Error(ErrorKind::InsufficientData, "build_features: need more than " + std::to_string(kNumLags) + " prices");
    }
    if (arima_mean.size() != n || garch_var.size() != n) {
        throw Error(ErrorKind::Alignment, "build_features: ARIMA and GARCH series must have one value per price");
    }
    const auto& dates = prices.dates();
    const std::set<Date> trading(dates.begin(), dates.end());
    std::vector<std::string> offenders;
    for (const auto& [d, s] : sentiments) {
        if (!trading.contains(d)) offenders.push_back("sentiment " + d.iso());
    }
    for (const auto& [d, e] : events) {
        if (!trading.contains(d)) offenders.push_back("events " + d.iso());
        if (e.type_vec.size() != type_dim || e.arg_embedding.size() != arg_dim) {
            throw Error(ErrorKind::Range, "build_features: event record for " + d.iso() + " has the wrong dimensions");
        }
    }
    if (!offenders.empty()) {
        std::string msg = "build_features: " + std::to_string(offenders.size()) + " key(s) are not trading dates:";
        for (const auto& o : offenders) msg += " " + o;
        throw Error(ErrorKind::Alignment, msg);
    }

    const auto empty = events::empty_record(type_dim, arg_dim);
    const auto& v = prices.values();
    std::vector<FeatureRow> rows;
    rows.reserve(n - kNumLags);
    for (std::size_t i = kNumLags; i < n; ++i) {
        FeatureRow r;
        r.date = dates[i];
        r.index = i;
        std::copy(v.begin() + static_cast<std::ptrdiff_t>(i - kNumLags), v.begin() + static_cast<std::ptrdiff_t>(i),
                  r.price_lags.begin());
        const Date news_day = dates[i - 1];
        if (const auto it = sentiments.find(news_day); it != sentiments.end()) {
            r.sentiment = it->second;
            r.has_news = true;
        }
        const auto ev = events.find(news_day);
        const auto& rec = ev != events.end() ? ev->second : empty;
        r.type_vec = rec.type_vec;
        r.arg_embedding = rec.arg_embedding;
        r.arima_mean = arima_mean[i];
        r.garch_var = garch_var[i];
        if (!std::isfinite(r.arima_mean) || !std::isfinite(r.garch_var) || r.garch_var < 0.0) {
            throw Error(ErrorKind::Alignment, "build_features: missing ARIMA mean or GARCH variance for " + dates[i].iso());
        }
        r.target = v[i];
        rows.push_back(std::move(r));
    }
    return rows;
}

SplitPlan plan_split(std::size_t n, double train_ratio, double val_fraction) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0) || !(val_fraction > 0.0 && val_fraction < 1.0)) {
        throw Error(ErrorKind::Range, "plan_split: ratios must lie in (0, 1)");
    }
    const auto val_end = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n) + 1e-9));
    const auto train_end = static_cast<std::size_t>(std::floor((1.0 - val_fraction) * static_cast<double>(val_end) + 1e-9));
    if (train_end == 0 || train_end >= val_end || val_end >= n) {
        throw Error(ErrorKind::InsufficientData, "plan_split: series too short for a train/validation/test split");
    }
    return {train_end, val_end, n};
}

}  // namespace agesl::pipeline
