#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace agesl::sentiment {

/// Four-way polarity score. For nonempty text neg + neu + pos == 1; for empty
/// text every field is zero.
struct SentimentVector {
    double neg = 0.0;
    double neu = 0.0;
    double pos = 0.0;
    double compound = 0.0;

    bool operator==(const SentimentVector&) const = default;
};

/// Valence lexicon plus the booster and negation word lists that drive the
/// rule set. Immutable once built.
class SentimentLexicon {
public:
    /// Reads the tab-separated lexicon format: token, mean valence, standard
    /// deviation, raw ratings. Only the first two columns are used. Comment
    /// lines start with '#'.
    static SentimentLexicon load(const std::filesystem::path& path);
    /// The lexicon shipped in the data directory.
    static const SentimentLexicon& bundled();
    /// Builds a lexicon from explicit valences with the standard booster and
    /// negation lists.
    static SentimentLexicon from_entries(std::unordered_map<std::string, double> entries);

    std::optional<double> valence(std::string_view lower) const;
    bool contains(std::string_view lower) const { return valence(lower).has_value(); }
    /// Signed booster increment for `lower`, 0 when it is not a booster.
    double booster(std::string_view lower) const;
    bool is_negation(std::string_view lower) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    SentimentLexicon();

    std::unordered_map<std::string, double> entries_;
    std::unordered_map<std::string, double> boosters_;
    std::unordered_set<std::string> negations_;
};

SentimentVector score_text(std::string_view text, const SentimentLexicon& lexicon);

/// Elementwise mean of one day's scores; (0, 1, 0, 0) for a day with no news.
SentimentVector aggregate_daily(std::span<const SentimentVector> scores);

/// Scores many texts in parallel; output order matches input order.
std::vector<SentimentVector> score_batch(std::span<const std::string> texts, const SentimentLexicon& lexicon);
std::vector<SentimentVector> score_batch_serial(std::span<const std::string> texts, const SentimentLexicon& lexicon);

}  // namespace agesl::sentiment
