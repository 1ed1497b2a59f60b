#include "agesl/ingest.hpp"
#include "agesl/embeddings.hpp"
#include "agesl/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace agesl::ingest {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line); }

}  // namespace

PriceSeries parse_price_csv(const std::filesystem::path& path, std::vector<std::string>* rejected) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open price file " + path.string());
    return parse_price_csv(in, path.string(), rejected);
}

PriceSeries parse_price_csv(std::istream& in, const std::string& source, std::vector<std::string>* rejected) {
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (!header && std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::string h(trim(line));
        h = text::ascii_lower(h);
        if (h != "date,close") throw Error(ErrorKind::Parse, where(source, lineno) + ": expected header 'date,close'");
        header = true;
    }
    if (!header) throw Error(ErrorKind::InsufficientData, source + ": empty price file");
    std::map<Date, double> rows;
    std::vector<std::string> bad;
    while (std::getline(in, line)) {
        ++lineno;
        const auto row = trim(line);
        if (row.empty()) continue;
        const auto comma = row.find(',');
        if (comma == std::string_view::npos) {
            bad.push_back(where(source, lineno) + ": expected two fields");
            continue;
        }
        const auto date = Date::parse(trim(row.substr(0, comma)));
        if (!date) {
            bad.push_back(where(source, lineno) + ": bad date '" + std::string(row.substr(0, comma)) + "'");
            continue;
        }
        const auto field = trim(row.substr(comma + 1));
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
        if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
            bad.push_back(where(source, lineno) + ": bad price '" + std::string(field) + "'");
            continue;
        }
        const auto [it, inserted] = rows.emplace(*date, value);
        if (!inserted && it->second != value) {
            throw Error(ErrorKind::Parse, source + ": duplicate date " + date->iso() + " with conflicting prices " +
                                              std::to_string(it->second) + " and " + std::to_string(value));
        }
    }
    if (rejected) {
        rejected->insert(rejected->end(), bad.begin(), bad.end());
    } else if (!bad.empty()) {
        std::string msg = "rejected " + std::to_string(bad.size()) + " price row(s):";
        for (const auto& b : bad) msg += "\n  " + b;
        throw Error(ErrorKind::Parse, msg);
    }
    if (rows.empty()) throw Error(ErrorKind::InsufficientData, source + ": no price rows");
    std::vector<Date> dates;
    std::vector<double> values;
    for (const auto& [d, v] : rows) {
        dates.push_back(d);
        values.push_back(v);
    }
    return {std::move(dates), std::move(values)};
}

CleanedSeries clean_outliers(const PriceSeries& series, int window) {
    if (window < 0) throw Error(ErrorKind::Range, "clean_outliers: negative window");
    const auto& v = series.values();
    std::vector<double> out = v;
    CleanedSeries result;
    const auto w = static_cast<std::size_t>(window);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > 0.0) continue;
        const std::size_t lo = i >= w ? i - w : 0;
        const std::size_t hi = std::min(v.size(), i + w + 1);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = lo; j < hi; ++j) {
            if (v[j] > 0.0) best = std::min(best, v[j]);
        }
        if (!std::isfinite(best)) {
            throw Error(ErrorKind::Degenerate, "clean_outliers: no positive price within " + std::to_string(window) +
                                                   " trading days of " + series.dates()[i].iso());
        }
        out[i] = best;
        result.replacements.push_back({i, series.dates()[i], v[i], best});
    }
    result.series = PriceSeries(series.dates(), std::move(out));
    return result;
}

std::string RawNewsItem::text() const {
    if (body.empty()) return headline;
    return headline + " " + body;
}

std::vector<NewsDay> parse_news_jsonl(const std::filesystem::path& path, std::span<const std::string> filter_terms) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open news file " + path.string());
    return parse_news_jsonl(in, path.string(), filter_terms);
}

std::vector<NewsDay> parse_news_jsonl(std::istream& in, const std::string& source,
                                      std::span<const std::string> filter_terms) {
    std::vector<std::string> terms;
    for (const auto& t : filter_terms) terms.push_back(text::ascii_lower(t));
    std::map<Date, std::vector<RawNewsItem>> days;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        RawNewsItem item;
        item.line = lineno;
        try {
            const auto j = nlohmann::json::parse(line);
            const auto date = Date::parse(j.at("date").get<std::string>());
            if (!date) throw Error(ErrorKind::Parse, where(source, lineno) + ": bad date");
            item.date = *date;
            item.headline = j.at("headline").get<std::string>();
            item.body = j.value("body", std::string{});
            item.source = j.value("source", std::string{});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Parse, where(source, lineno) + ": " + e.what());
        }
        if (item.headline.empty()) throw Error(ErrorKind::Parse, where(source, lineno) + ": empty headline");
        if (!terms.empty()) {
            const auto h = text::ascii_lower(item.headline);
            const auto b = text::ascii_lower(item.body);
            const bool keep = std::any_of(terms.begin(), terms.end(), [&](const std::string& t) {
                return h.find(t) != std::string::npos || b.find(t) != std::string::npos;
            });
            if (!keep) continue;
        }
        days[item.date].push_back(std::move(item));
    }
    std::vector<NewsDay> out;
    for (auto& [d, items] : days) out.push_back({d, std::move(items)});
    return out;
}

std::vector<std::vector<RawNewsItem>> align_to_trading_days(std::span<const NewsDay> news,
                                                            std::span<const Date> trading_days, std::size_t* dropped) {
    std::vector<std::vector<RawNewsItem>> out(trading_days.size());
    std::size_t lost = 0;
    for (const auto& day : news) {
        const auto it = std::lower_bound(trading_days.begin(), trading_days.end(), day.date);
        if (it == trading_days.end()) {
            lost += day.items.size();
            continue;
        }
        auto& slot = out[static_cast<std::size_t>(it - trading_days.begin())];
        slot.insert(slot.end(), day.items.begin(), day.items.end());
    }
    if (dropped) *dropped = lost;
    return out;
}

std::vector<std::size_t> top_items_by_sentiment(std::span<const sentiment::SentimentVector> scores, std::size_t k) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(scores[a].compound) > std::abs(scores[b].compound);
    });
    if (idx.size() > k) idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace agesl::ingest
