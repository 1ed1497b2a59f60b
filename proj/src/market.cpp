#include "agesl/error.hpp"
#include "agesl/ingest.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace agesl::synthetic {

namespace {

struct Template {
    EventCategory category;
    std::vector<std::string> subjects;
    std::vector<std::string> verbs;
    std::vector<std::string> objects;
    std::vector<std::string> places;
};

const std::vector<Template>& templates() {
    static const std::vector<Template> t = {
        {{"disruption", 1.4},
         {"militants", "rebels", "saboteurs"},
         {"attacked", "bombed", "sabotaged"},
         {"pipeline", "terminal", "refinery", "oilfield"},
         {"Nigeria", "Libya", "Iraq"}},
        {{"opec_cut", 1.0}, {"OPEC", "ministers"}, {"cut", "reduced", "curbed"}, {"output", "production", "quotas"}, {"Vienna"}},
        {{"demand_boom", 0.7},
         {"factories", "airlines"},
         {"boosted", "expanded", "increased"},
         {"imports", "consumption", "orders"},
         {"Asia", "China"}},
        {{"glut", -0.9}, {"drillers", "frackers"}, {"pumped", "added"}, {"barrels", "rigs", "wells"}, {"Texas", "Dakota"}},
        {{"stock_build", -0.7}, {"operators"}, {"filled", "stored"}, {"tanks", "caverns", "stockpiles"}, {"Cushing", "Rotterdam"}},
        {{"slump", -1.2},
         {"consumers", "manufacturers"},
         {"slashed", "delayed", "cancelled"},
         {"purchases", "shipments", "contracts"},
         {"Europe", "Japan"}},
        {{"routine", 0.0},
         {"officials", "analysts"},
         {"discussed", "reviewed", "published"},
         {"report", "forecast", "survey"},
         {"London", "Houston"}},
    };
    return t;
}

constexpr int kRoutine = 6;

const std::vector<std::string> kPositive = {"strong", "optimistic", "confident", "healthy", "robust", "buoyant", "cheerful"};
const std::vector<std::string> kNegative = {"weak", "gloomy", "nervous", "grim", "pessimistic", "worried", "fearful", "shaky"};
const std::vector<std::string> kBoosters = {"very", "extremely"};
const std::vector<std::string> kSources = {"wire", "daily", "journal"};
const std::vector<std::string> kCities = {"Boston", "Madrid", "Lyon", "Turin"};

struct Row {
    std::string form;
    std::string upos;
    int head;
    std::string deprel;
};

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string capitalized(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string sentence_text(const std::vector<Row>& rows) {
    std::string out;
    for (const auto& r : rows) {
        if (!out.empty() && r.upos != "PUNCT") out += ' ';
        out += r.form;
    }
    return out;
}

void write_sentence(std::ostringstream& os, const std::string& sent_id, const std::vector<Row>& rows,
                    const events::SupersenseTable& sst) {
    os << "# sent_id = " << sent_id << "\n# text = " << sentence_text(rows) << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto lemma = text::ascii_lower(r.form);
        std::string misc = "_";
        if (r.upos == "NOUN" || r.upos == "PROPN") {
            const auto tag = sst.lookup(lemma);
            if (!tag.empty()) misc = "SST=" + tag;
        }
        os << i + 1 << '\t' << r.form << '\t' << lemma << '\t' << r.upos << "\t_\t_\t" << r.head << '\t' << r.deprel
           << "\t_\t" << misc << '\n';
    }
    os << '\n';
}

bool is_weekend(Date d) {
    // 1970-01-01 was a Thursday
    const auto wd = ((d.days_since_epoch() % 7) + 7 + 3) % 7;  // 0 = Monday
    return wd >= 5;
}

std::vector<Date> weekdays(Date start, std::size_t n) {
    std::vector<Date> out;
    for (auto day = start.days_since_epoch(); out.size() < n; ++day) {
        const auto d = Date::from_days(day);
        if (!is_weekend(d)) out.push_back(d);
    }
    return out;
}

MarketItem make_item(int category, bool positive_mood, std::mt19937_64& rng, const events::SupersenseTable& sst) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MarketItem item;
    item.category = category;
    item.source = pick(kSources, rng);
    std::vector<Row> head_rows;
    std::vector<Row> body_rows;
    if (category < 0) {
        const auto city = pick(kCities, rng);
        head_rows = {{"Fans", "NOUN", 2, "nsubj"}, {"cheered", "VERB", 0, "root"}, {"the", "DET", 4, "det"},
                     {"team", "NOUN", 2, "obj"},   {"in", "ADP", 6, "case"},      {city, "PROPN", 2, "obl"}};
        body_rows = {{"Tickets", "NOUN", 2, "nsubj"},
                     {"sold", "VERB", 0, "root"},
                     {"out", "ADP", 2, "compound:prt"},
                     {"quickly", "ADV", 2, "advmod"},
                     {".", "PUNCT", 2, "punct"}};
    } else {
        const auto& t = templates()[static_cast<std::size_t>(category)];
        const auto subj = pick(t.subjects, rng);
        head_rows = {{capitalized(subj), subj == "OPEC" ? "PROPN" : "NOUN", 2, "nsubj"},
                     {pick(t.verbs, rng), "VERB", 0, "root"},
                     {pick(t.objects, rng), "NOUN", 2, "obj"},
                     {"in", "ADP", 5, "case"},
                     {pick(t.places, rng), "PROPN", 2, "obl"}};
        const auto& adjectives = positive_mood ? kPositive : kNegative;
        body_rows = {{"Traders", "NOUN", 2, "nsubj"}, {"called", "VERB", 0, "root"}, {"the", "DET", 5, "det"},
                     {"oil", "NOUN", 5, "compound"},  {"market", "NOUN", 2, "obj"}};
        if (u(rng) < 0.3) {
            body_rows.push_back({pick(kBoosters, rng), "ADV", 7, "advmod"});
            body_rows.push_back({pick(adjectives, rng), "ADJ", 2, "xcomp"});
        } else {
            body_rows.push_back({pick(adjectives, rng), "ADJ", 2, "xcomp"});
        }
        body_rows.push_back({".", "PUNCT", 2, "punct"});
    }
    item.headline = sentence_text(head_rows);
    item.body = sentence_text(body_rows);
    std::ostringstream os;
    write_sentence(os, "1", head_rows, sst);
    write_sentence(os, "2", body_rows, sst);
    item.conllu = os.str();
    return item;
}

}  // namespace

std::span<const EventCategory> market_categories() {
    static const std::vector<EventCategory> cats = [] {
        std::vector<EventCategory> out;
        for (const auto& t : templates()) out.push_back(t.category);
        return out;
    }();
    return cats;
}

MarketCorpus generate_market_corpus(const MarketOptions& o, std::uint64_t seed) {
    if (o.num_days < 30) throw Error(ErrorKind::Range, "market corpus: need at least 30 days");
    if (o.alpha + o.beta >= 1.0 || o.omega <= 0.0) throw Error(ErrorKind::Range, "market corpus: GARCH parameters not stationary");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& lexicon = sentiment::SentimentLexicon::bundled();
    const auto& sst = events::SupersenseTable::bundled();
    const auto num_categories = static_cast<int>(templates().size());

    MarketCorpus corpus;
    const auto dates = weekdays(o.start, o.num_days);
    const std::size_t n = dates.size();
    corpus.effect.assign(n, 0.0);
    corpus.compound.assign(n, 0.0);
    corpus.sigma2.assign(n, 0.0);

    double mood = 0.0;
    std::size_t next_id = 1;
    for (std::size_t j = 0; j < n; ++j) {
        mood = 0.6 * mood + 0.8 * normal(rng);
        if (u(rng) < o.no_news_prob) continue;
        const int count = std::uniform_int_distribution<int>(o.min_items, o.max_items)(rng);
        const int dominant = std::uniform_int_distribution<int>(0, num_categories - 1)(rng);
        const double p_positive = 1.0 / (1.0 + std::exp(-2.0 * mood));
        std::vector<MarketItem> day;
        for (int k = 0; k < count; ++k) {
            int category = u(rng) < o.dominance ? dominant : kRoutine;
            if (u(rng) < o.off_topic_prob) category = -1;
            auto item = make_item(category, u(rng) < p_positive, rng, sst);
            item.date = dates[j];
            const bool monday = j > 0 && dates[j].days_since_epoch() - dates[j - 1].days_since_epoch() > 1;
            if (monday && u(rng) < o.weekend_prob) {
                item.date = Date::from_days(dates[j].days_since_epoch() - (u(rng) < 0.5 ? 1 : 2));
            }
            day.push_back(std::move(item));
        }
        std::stable_sort(day.begin(), day.end(), [](const MarketItem& a, const MarketItem& b) { return a.date < b.date; });

        std::vector<sentiment::SentimentVector> scores;
        std::vector<int> cats;
        for (const auto& item : day) {
            if (item.category < 0) continue;
            scores.push_back(sentiment::score_text(item.headline + " " + item.body, lexicon));
            cats.push_back(item.category);
        }
        if (!scores.empty()) {
            const auto keep = ingest::top_items_by_sentiment(scores, 5);
            std::vector<sentiment::SentimentVector> kept;
            double effect = 0.0;
            for (auto k : keep) {
                kept.push_back(scores[k]);
                effect += templates()[static_cast<std::size_t>(cats[k])].category.effect;
            }
            corpus.effect[j] = o.effect_scale * effect / static_cast<double>(keep.size());
            corpus.compound[j] = sentiment::aggregate_daily(kept).compound;
        }
        for (auto& item : day) {
            char id[16];
            std::snprintf(id, sizeof id, "n%06zu", next_id++);
            item.id = id;
            corpus.items.push_back(std::move(item));
        }
    }

    std::vector<double> p(n);
    p[0] = o.anchor;
    double sigma2 = o.omega / (1.0 - o.alpha - o.beta);
    double a_prev = 0.0;
    double d_prev = 0.0;
    double sigma_prev = std::sqrt(sigma2);
    corpus.sigma2[0] = sigma2;
    for (std::size_t t = 1; t < n; ++t) {
        sigma2 = o.omega + o.alpha * a_prev * a_prev + o.beta * sigma2;
        const double sigma = std::sqrt(sigma2);
        const std::size_t lo = t >= 20 ? t - 20 : 0;
        double ma = 0.0;
        for (std::size_t k = lo; k < t; ++k) ma += p[k];
        ma /= static_cast<double>(t - lo);
        const double a = sigma * normal(rng);
        const double d = o.ar * d_prev + o.pull * (ma - p[t - 1]) + o.anchor_pull * (o.anchor - p[t - 1]) +
                         o.rebound * (std::abs(d_prev) - std::sqrt(2.0 / M_PI) * sigma_prev) + corpus.effect[t - 1] +
                         o.kappa * corpus.compound[t - 1] * sigma + a;
        p[t] = p[t - 1] + d;
        if (p[t] <= 1.0) throw Error(ErrorKind::Degenerate, "market corpus: price path left the positive range");
        corpus.sigma2[t] = sigma2;
        a_prev = a;
        d_prev = d;
        sigma_prev = sigma;
    }
    corpus.prices = PriceSeries(dates, p);

    std::set<std::string> words;
    for (const auto& item : corpus.items) {
        std::istringstream in(item.conllu);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto a = line.find('\t');
            const auto b = line.find('\t', a + 1);
            const auto c = line.find('\t', b + 1);
            const auto d = line.find('\t', c + 1);
            if (line.substr(c + 1, d - c - 1) == "PUNCT") continue;
            words.insert(line.substr(b + 1, c - b - 1));
        }
    }
    std::map<std::string, int> word_category;
    for (int c = 0; c < num_categories; ++c) {
        const auto& t = templates()[static_cast<std::size_t>(c)];
        for (const auto* list : {&t.subjects, &t.verbs, &t.objects, &t.places}) {
            for (const auto& w : *list) word_category[text::ascii_lower(w)] = c;
        }
    }
    std::vector<Eigen::VectorXd> centroids;
    for (int c = 0; c < num_categories; ++c) {
        Eigen::VectorXd v(o.embed_dim);
        for (auto& x : v) x = normal(rng);
        centroids.push_back(v);
    }
    for (const auto& w : words) {
        Eigen::VectorXd v(o.embed_dim);
        for (auto& x : v) x = normal(rng);
        if (auto it = word_category.find(w); it != word_category.end()) {
            v = centroids[static_cast<std::size_t>(it->second)] + o.embed_noise * v;
        }
        corpus.embeddings.emplace_back(w, v / std::sqrt(static_cast<double>(o.embed_dim)));
    }
    return corpus;
}

void write_market_corpus(const MarketCorpus& corpus, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "conllu");
    const auto open = [&](const fs::path& rel) {
        std::ofstream out(dir / rel);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + (dir / rel).string());
        return out;
    };
    char buf[64];
    {
        auto out = open("prices.csv");
        out << "date,close\n";
        for (std::size_t i = 0; i < corpus.prices.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.4f", corpus.prices.values()[i]);
            out << corpus.prices.dates()[i].iso() << ',' << buf << '\n';
        }
    }
    {
        auto out = open("truth.csv");
        out << "date,effect,compound,sigma2\n";
        for (std::size_t i = 0; i < corpus.prices.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", corpus.effect[i], corpus.compound[i], corpus.sigma2[i]);
            out << corpus.prices.dates()[i].iso() << ',' << buf << '\n';
        }
    }
    std::map<std::string, std::string> months;
    {
        auto news = open("news.jsonl");
        auto manifest = open("manifest.jsonl");
        std::size_t line = 0;
        for (const auto& item : corpus.items) {
            ++line;
            news << nlohmann::json{{"date", item.date.iso()}, {"headline", item.headline}, {"body", item.body},
                                   {"source", item.source}}
                        .dump()
                 << '\n';
            const auto file = "conllu/" + item.date.iso().substr(0, 7) + ".conllu";
            manifest << nlohmann::json{{"item_id", item.id}, {"date", item.date.iso()}, {"conllu", file},
                                       {"source_line", line}}
                            .dump()
                     << '\n';
            months[file] += "# newdoc id = " + item.id + "\n# date = " + item.date.iso() + "\n" + item.conllu;
        }
    }
    for (const auto& [file, text] : months) open(file) << text;
    {
        auto out = open("embeddings.txt");
        const auto dim = corpus.embeddings.empty() ? 0 : corpus.embeddings.front().second.size();
        out << "# " << corpus.embeddings.size() << " tokens, " << dim << " dimensions\n";
        for (const auto& [word, v] : corpus.embeddings) {
            out << word;
            for (double x : v) {
                std::snprintf(buf, sizeof buf, " %.5f", x);
                out << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace agesl::synthetic
