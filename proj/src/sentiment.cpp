#include "agesl/sentiment.hpp"
#include "agesl/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace agesl::sentiment {

namespace {

constexpr double kBoostIncr = 0.293;
constexpr double kBoostDecr = -0.293;
constexpr double kCapsIncr = 0.733;
constexpr double kNegScalar = -0.74;

const std::unordered_map<std::string, double>& standard_boosters() {
    static const std::unordered_map<std::string, double> kMap = [] {
        std::unordered_map<std::string, double> m;
        for (const char* w :
             {"absolutely", "amazingly", "awfully", "completely", "considerable", "considerably", "decidedly",
              "deeply", "effing", "enormous", "enormously", "entirely", "especially", "exceptional",
              "exceptionally", "extreme", "extremely", "fabulously", "flipping", "flippin", "frackin", "fracking",
              "fricking", "frickin", "frigging", "friggin", "fully", "fuckin", "fucking", "fuggin", "fugging",
              "greatly", "hella", "highly", "hugely", "incredible", "incredibly", "intensely", "major", "majorly",
              "more", "most", "particularly", "purely", "quite", "really", "remarkably", "so", "substantially",
              "thoroughly", "total", "totally", "tremendous", "tremendously", "uber", "unbelievably", "unusually",
              "utter", "utterly", "very"}) {
            m.emplace(w, kBoostIncr);
        }
        for (const char* w : {"almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof", "kind-of",
                              "less", "little", "marginal", "marginally", "occasional", "occasionally", "partly",
                              "scarce", "scarcely", "slight", "slightly", "somewhat", "sort of", "sorta", "sortof",
                              "sort-of"}) {
            m.emplace(w, kBoostDecr);
        }
        return m;
    }();
    return kMap;
}

const std::unordered_set<std::string>& standard_negations() {
    static const std::unordered_set<std::string> kSet = {
        "aint",     "arent",    "cannot",  "cant",     "couldnt",   "darent",   "didnt",    "doesnt",
        "ain't",    "aren't",   "can't",   "couldn't", "daren't",   "didn't",   "doesn't",  "dont",
        "hadnt",    "hasnt",    "havent",  "isnt",     "mightnt",   "mustnt",   "neither",  "don't",
        "hadn't",   "hasn't",   "haven't", "isn't",    "mightn't",  "mustn't",  "neednt",   "needn't",
        "never",    "none",     "nope",    "nor",      "not",       "nothing",  "nowhere",  "oughtnt",
        "shant",    "shouldnt", "uhuh",    "wasnt",    "werent",    "oughtn't", "shan't",   "shouldn't",
        "uh-uh",    "wasn't",   "weren't", "without",  "wont",      "wouldnt",  "won't",    "wouldn't",
        "rarely",   "seldom",   "despite"};
    return kSet;
}

const std::unordered_map<std::string, double>& special_cases() {
    static const std::unordered_map<std::string, double> kMap = {
        {"the shit", 3},     {"the bomb", 3},      {"bad ass", 1.5},      {"badass", 1.5},
        {"bus stop", 0.0},   {"yeah right", -2},   {"kiss of death", -1.5}, {"to die for", 3},
        {"beating heart", 3.5}};
    return kMap;
}

bool is_punct(char c) {
    return std::string_view(R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)").find(c) != std::string_view::npos;
}

std::size_t codepoints(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

// At least one cased character and none of them lower case.
bool is_upper(std::string_view s) {
    bool cased = false;
    for (char c : s) {
        if (c >= 'a' && c <= 'z') return false;
        if (c >= 'A' && c <= 'Z') cased = true;
    }
    return cased;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Whitespace tokens with leading/trailing punctuation removed, unless that
// leaves two characters or fewer (emoticons such as ":)" survive intact).
std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) {
            std::string_view tok = text.substr(i, j - i);
            std::size_t a = 0, b = tok.size();
            while (a < b && is_punct(tok[a])) ++a;
            while (b > a && is_punct(tok[b - 1])) --b;
            std::string_view stripped = tok.substr(a, b - a);
            out.emplace_back(codepoints(stripped) <= 2 ? tok : stripped);
        }
        i = j;
    }
    return out;
}

class Scorer {
public:
    Scorer(const SentimentLexicon& lex, std::string_view text) : lex_(lex), text_(text) {
        words_ = tokenize(text);
        lower_.reserve(words_.size());
        for (const auto& w : words_) lower_.push_back(lower(w));
        const auto caps = static_cast<std::size_t>(std::count_if(words_.begin(), words_.end(),
                                                                 [](const std::string& w) { return is_upper(w); }));
        const std::size_t diff = words_.size() - caps;
        cap_diff_ = diff > 0 && diff < words_.size();
    }

    SentimentVector run() {
        std::vector<double> sentiments;
        sentiments.reserve(words_.size());
        for (std::size_t i = 0; i < words_.size(); ++i) {
            if (lex_.booster(lower_[i]) != 0.0 || standard_boosters().contains(lower_[i])) {
                sentiments.push_back(0.0);
                continue;
            }
            if (i + 1 < words_.size() && lower_[i] == "kind" && lower_[i + 1] == "of") {
                sentiments.push_back(0.0);
                continue;
            }
            sentiments.push_back(valence_at(i));
        }
        but_check(sentiments);
        return summarize(sentiments);
    }

private:
    bool in_lex(std::size_t i) const { return lex_.contains(lower_[i]); }

    bool negated(const std::string& w) const {
        return lex_.is_negation(w) || w.find("n't") != std::string::npos;
    }

    double scalar_inc_dec(std::size_t j, double valence) const {
        double scalar = lex_.booster(lower_[j]);
        if (scalar == 0.0) return 0.0;
        if (valence < 0) scalar = -scalar;
        if (is_upper(words_[j]) && cap_diff_) scalar += valence > 0 ? kCapsIncr : -kCapsIncr;
        return scalar;
    }

    double valence_at(std::size_t i) {
        const auto base = lex_.valence(lower_[i]);
        if (!base) return 0.0;
        double valence = *base;
        const std::size_t n = words_.size();
        if (lower_[i] == "no" && i != n - 1 && in_lex(i + 1)) valence = 0.0;
        if ((i > 0 && lower_[i - 1] == "no") || (i > 1 && lower_[i - 2] == "no") ||
            (i > 2 && lower_[i - 3] == "no" && (lower_[i - 1] == "or" || lower_[i - 1] == "nor"))) {
            valence = *base * kNegScalar;
        }
        if (is_upper(words_[i]) && cap_diff_) valence += valence > 0 ? kCapsIncr : -kCapsIncr;

        for (std::size_t start = 0; start < 3; ++start) {
            if (i > start && !in_lex(i - start - 1)) {
                double s = scalar_inc_dec(i - start - 1, valence);
                if (start == 1 && s != 0) s *= 0.95;
                if (start == 2 && s != 0) s *= 0.9;
                valence += s;
                valence = negation_check(valence, start, i);
                if (start == 2) valence = special_idioms_check(valence, i);
            }
        }
        return least_check(valence, i);
    }

    double negation_check(double valence, std::size_t start, std::size_t i) const {
        const auto& w = lower_;
        if (start == 0) {
            if (negated(w[i - 1])) valence *= kNegScalar;
        } else if (start == 1) {
            if (w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this")) {
                valence *= 1.25;
            } else if (w[i - 2] == "without" && w[i - 1] == "doubt") {
            } else if (negated(w[i - 2])) {
                valence *= kNegScalar;
            }
        } else {
            if ((w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this")) ||
                (w[i - 1] == "so" || w[i - 1] == "this")) {
                valence *= 1.25;
            } else if (w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt")) {
            } else if (negated(w[i - 3])) {
                valence *= kNegScalar;
            }
        }
        return valence;
    }

    double special_idioms_check(double valence, std::size_t i) const {
        const auto& w = lower_;
        const std::string onezero = w[i - 1] + " " + w[i];
        const std::string twoonezero = w[i - 2] + " " + w[i - 1] + " " + w[i];
        const std::string twoone = w[i - 2] + " " + w[i - 1];
        const std::string threetwoone = w[i - 3] + " " + w[i - 2] + " " + w[i - 1];
        const std::string threetwo = w[i - 3] + " " + w[i - 2];
        const auto& sc = special_cases();
        for (const auto* seq : {&onezero, &twoonezero, &twoone, &threetwoone, &threetwo}) {
            if (auto it = sc.find(*seq); it != sc.end()) {
                valence = it->second;
                break;
            }
        }
        if (w.size() - 1 > i) {
            if (auto it = sc.find(w[i] + " " + w[i + 1]); it != sc.end()) valence = it->second;
        }
        if (w.size() - 1 > i + 1) {
            if (auto it = sc.find(w[i] + " " + w[i + 1] + " " + w[i + 2]); it != sc.end()) valence = it->second;
        }
        for (const auto* gram : {&threetwoone, &threetwo, &twoone}) {
            valence += lex_.booster(*gram);
        }
        return valence;
    }

    double least_check(double valence, std::size_t i) const {
        const auto& w = lower_;
        if (i > 1 && !in_lex(i - 1) && w[i - 1] == "least") {
            if (w[i - 2] != "at" && w[i - 2] != "very") valence *= kNegScalar;
        } else if (i > 0 && !in_lex(i - 1) && w[i - 1] == "least") {
            valence *= kNegScalar;
        }
        return valence;
    }

    // Sentiment before the first "but" is halved and after it boosted by half.
    // Each pass rescales the first entry equal to the visited value, which is
    // what the reference implementation does with duplicate values.
    void but_check(std::vector<double>& s) const {
        const auto it = std::find(lower_.begin(), lower_.end(), "but");
        if (it == lower_.end()) return;
        const auto bi = static_cast<std::size_t>(it - lower_.begin());
        for (std::size_t k = 0; k < s.size(); ++k) {
            const double v = s[k];
            const auto si = static_cast<std::size_t>(std::find(s.begin(), s.end(), v) - s.begin());
            if (si < bi) {
                s[si] = v * 0.5;
            } else if (si > bi) {
                s[si] = v * 1.5;
            }
        }
    }

    double punctuation_amplifier() const {
        const auto ep = std::min<long>(std::count(text_.begin(), text_.end(), '!'), 4);
        const auto qm = std::count(text_.begin(), text_.end(), '?');
        double amp = static_cast<double>(ep) * 0.292;
        if (qm > 1) amp += qm <= 3 ? static_cast<double>(qm) * 0.18 : 0.96;
        return amp;
    }

    SentimentVector summarize(const std::vector<double>& sentiments) const {
        SentimentVector out;
        if (sentiments.empty()) {
            out.neu = 1.0;
            return out;
        }
        double sum = 0.0;
        for (double v : sentiments) sum += v;
        const double amp = punctuation_amplifier();
        if (sum > 0) {
            sum += amp;
        } else if (sum < 0) {
            sum -= amp;
        }
        out.compound = std::clamp(sum / std::sqrt(sum * sum + 15.0), -1.0, 1.0);

        double pos_sum = 0.0, neg_sum = 0.0, neu_count = 0.0;
        for (double v : sentiments) {
            if (v > 0) pos_sum += v + 1.0;
            if (v < 0) neg_sum += v - 1.0;
            if (v == 0) neu_count += 1.0;
        }
        if (pos_sum > std::abs(neg_sum)) {
            pos_sum += amp;
        } else if (pos_sum < std::abs(neg_sum)) {
            neg_sum -= amp;
        }
        const double total = pos_sum + std::abs(neg_sum) + neu_count;
        out.pos = std::abs(pos_sum / total);
        out.neg = std::abs(neg_sum / total);
        out.neu = std::abs(neu_count / total);
        return out;
    }

    const SentimentLexicon& lex_;
    std::string_view text_;
    std::vector<std::string> words_;
    std::vector<std::string> lower_;
    bool cap_diff_ = false;
};

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

}  // namespace

SentimentLexicon::SentimentLexicon() : boosters_(standard_boosters()), negations_(standard_negations()) {}

SentimentLexicon SentimentLexicon::from_entries(std::unordered_map<std::string, double> entries) {
    SentimentLexicon lex;
    for (const auto& [token, v] : entries) {
        if (!std::isfinite(v) || v < -4.0 || v > 4.0) {
            throw Error(ErrorKind::Range, "sentiment lexicon: valence out of [-4, 4] for '" + token + "'");
        }
    }
    lex.entries_ = std::move(entries);
    return lex;
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open sentiment lexicon " + path.string());
    std::unordered_map<std::string, double> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": expected token<TAB>valence");
        }
        const auto tab2 = line.find('\t', tab + 1);
        const std::string value = line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1);
        double v = 0.0;
        try {
            std::size_t used = 0;
            v = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": bad valence '" + value + "'");
        }
        entries[line.substr(0, tab)] = v;
    }
    return from_entries(std::move(entries));
}

const SentimentLexicon& SentimentLexicon::bundled() {
    static const SentimentLexicon kLex = load(std::filesystem::path(AGESL_DATA_DIR) / "vader_lexicon.tsv");
    return kLex;
}

std::optional<double> SentimentLexicon::valence(std::string_view lower) const {
    const auto it = entries_.find(std::string(lower));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

double SentimentLexicon::booster(std::string_view lower) const {
    const auto it = boosters_.find(std::string(lower));
    return it == boosters_.end() ? 0.0 : it->second;
}

bool SentimentLexicon::is_negation(std::string_view lower) const { return negations_.contains(std::string(lower)); }

SentimentVector score_text(std::string_view text, const SentimentLexicon& lexicon) {
    const std::string_view body = trim(text);
    if (body.empty()) return {};
    return Scorer(lexicon, body).run();
}

SentimentVector aggregate_daily(std::span<const SentimentVector> scores) {
    if (scores.empty()) return {0.0, 1.0, 0.0, 0.0};
    SentimentVector m;
    for (const auto& s : scores) {
        m.neg += s.neg;
        m.neu += s.neu;
        m.pos += s.pos;
        m.compound += s.compound;
    }
    const double n = static_cast<double>(scores.size());
    m.neg /= n;
    m.neu /= n;
    m.pos /= n;
    m.compound /= n;
    return m;
}

std::vector<SentimentVector> score_batch(std::span<const std::string> texts, const SentimentLexicon& lexicon) {
    std::vector<SentimentVector> out(texts.size());
    const auto n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = score_text(texts[static_cast<std::size_t>(i)], lexicon);
    }
    return out;
}

std::vector<SentimentVector> score_batch_serial(std::span<const std::string> texts, const SentimentLexicon& lexicon) {
    std::vector<SentimentVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(score_text(t, lexicon));
    return out;
}

}  // namespace agesl::sentiment
