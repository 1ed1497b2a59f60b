#pragma once

#include "agesl/date.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/timeseries.hpp"

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace agesl::ingest {

/// CSV with header `date,close`. Rows are sorted by date; exact duplicates
/// collapse, duplicates with different prices are an error. Rows with a bad
/// date or price are described ("file:line: reason") in `rejected` and
/// skipped; without `rejected` they make the call fail.
PriceSeries parse_price_csv(const std::filesystem::path& path, std::vector<std::string>* rejected = nullptr);
PriceSeries parse_price_csv(std::istream& in, const std::string& source_name,
                            std::vector<std::string>* rejected = nullptr);

struct OutlierReplacement {
    std::size_t index = 0;
    Date date;
    double original = 0.0;
    double replacement = 0.0;
};

struct CleanedSeries {
    PriceSeries series;
    std::vector<OutlierReplacement> replacements;
};

/// Replaces every value <= 0 by the smallest positive value within `window`
/// trading days on either side (taken from the uncleaned series).
CleanedSeries clean_outliers(const PriceSeries& series, int window = 5);

struct RawNewsItem {
    Date date;
    std::string headline;
    std::string body;
    std::string source;
    std::size_t line = 0;  // 1-based line in the source file

    /// Headline and body scored as one text.
    std::string text() const;
};

struct NewsDay {
    Date date;
    std::vector<RawNewsItem> items;
};

/// One JSON object per line with keys date, headline, body, source. Items
/// whose headline or body contains any filter term (case-insensitive) are
/// kept; an empty filter keeps everything. Output is grouped by date,
/// ascending, items in file order.
std::vector<NewsDay> parse_news_jsonl(const std::filesystem::path& path, std::span<const std::string> filter_terms);
std::vector<NewsDay> parse_news_jsonl(std::istream& in, const std::string& source_name,
                                      std::span<const std::string> filter_terms);

/// Moves each day's news onto the first trading day on or after it. Result
/// has one entry per trading day; news after the last trading day is dropped
/// and counted in `dropped`.
std::vector<std::vector<RawNewsItem>> align_to_trading_days(std::span<const NewsDay> news,
                                                            std::span<const Date> trading_days,
                                                            std::size_t* dropped = nullptr);

/// Keeps the `k` items with the largest |compound| score, ties in input order,
/// returned in input order.
std::vector<std::size_t> top_items_by_sentiment(std::span<const sentiment::SentimentVector> scores, std::size_t k = 5);

}  // namespace agesl::ingest
