#include "common.hpp"

#include "agesl/conllu.hpp"
#include "agesl/error.hpp"
#include "agesl/ingest.hpp"
#include "agesl/sentiment.hpp"
#include "agesl/synthetic.hpp"

#include <set>
#include <sstream>

using namespace agesl;
using namespace agesl::ingest;

namespace {

PriceSeries series(std::vector<double> v) {
    std::vector<Date> d;
    for (std::size_t i = 0; i < v.size(); ++i) d.push_back(Date::from_days(18000 + static_cast<std::int64_t>(i)));
    return {d, std::move(v)};
}

std::vector<NewsDay> news(const std::string& jsonl, std::vector<std::string> terms) {
    std::istringstream in(jsonl);
    return parse_news_jsonl(in, "inline.jsonl", terms);
}

std::size_t count_items(const std::vector<NewsDay>& days) {
    std::size_t n = 0;
    for (const auto& d : days) n += d.items.size();
    return n;
}

const char* kFourItems =
    R"({"date": "2020-01-02", "headline": "Crude oil rallies", "body": "Prices rose.", "source": "a"}
{"date": "2020-01-02", "headline": "Gold steady", "body": "Bullion flat.", "source": "b"}
{"date": "2020-01-03", "headline": "Markets", "body": "CRUDE OIL slides on supply fears.", "source": "a"}
{"date": "2020-01-04", "headline": "Football", "body": "A late goal.", "source": "c"}
)";

}  // namespace

TEST_CASE("price csv parsing") {
    std::istringstream ok("date,close\n2020-01-03,61.2\n2020-01-02,61.0\n2020-01-06,62.5\n");
    const auto s = parse_price_csv(ok, "ok.csv");
    CHECK(s.size() == 3);
    CHECK(s.dates().front() == Date(2020, 1, 2));
    CHECK(s.values().front() == 61.0);

    std::istringstream dup("date,close\n2020-01-02,61.0\n2020-01-02,61.0\n");
    CHECK(parse_price_csv(dup, "dup.csv").size() == 1);

    std::istringstream conflict("date,close\n2020-01-02,61.0\n2020-01-02,62.0\n");
    try {
        parse_price_csv(conflict, "conflict.csv");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2020-01-02") != std::string::npos);
    }

    std::istringstream empty("date,close\n");
    CHECK_THROWS_AS(parse_price_csv(empty, "empty.csv"), Error);
    std::istringstream nothing("");
    CHECK_THROWS_AS(parse_price_csv(nothing, "nothing.csv"), Error);
}

TEST_CASE("bad price rows are rejected with line numbers") {
    std::istringstream in("date,close\n2020-01-02,61.0\n2020-13-01,60\n2020-01-03,abc\n2020-01-06,62\n");
    std::vector<std::string> rejected;
    const auto s = parse_price_csv(in, "mixed.csv", &rejected);
    CHECK(s.size() == 2);
    REQUIRE(rejected.size() == 2);
    CHECK(rejected[0].rfind("mixed.csv:3", 0) == 0);
    CHECK(rejected[1].rfind("mixed.csv:4", 0) == 0);

    std::istringstream strict("date,close\n2020-13-01,60\n2020-01-02,61\n");
    CHECK_THROWS_AS(parse_price_csv(strict, "strict.csv"), Error);
}

TEST_CASE("outlier cleaning") {
    const auto c = clean_outliers(series({10, -37, 12}));
    CHECK(c.series.values() == std::vector<double>{10, 10, 12});
    REQUIRE(c.replacements.size() == 1);
    CHECK(c.replacements[0].index == 1);
    CHECK(c.replacements[0].original == -37);

    const auto same = clean_outliers(series({3, 4, 5}));
    CHECK(same.series.values() == std::vector<double>{3, 4, 5});
    CHECK(same.replacements.empty());

    CHECK_THROWS_AS(clean_outliers(series({-1, -2, -3})), Error);
}

TEST_CASE("outlier cleaning is idempotent and uses the raw neighbours") {
    const auto once = clean_outliers(series({20, 18, -5, 0, 25, 30, 31, 32, 33}));
    CHECK(once.series.values()[2] == 18);
    CHECK(once.series.values()[3] == 18);
    const auto twice = clean_outliers(once.series);
    CHECK(twice.series.values() == once.series.values());
    CHECK(twice.replacements.empty());
}

TEST_CASE("news filtering and grouping") {
    const auto oil = news(kFourItems, {"crude oil"});
    CHECK(count_items(oil) == 2);
    CHECK(oil.size() == 2);
    const auto all = news(kFourItems, {});
    CHECK(count_items(all) == 4);
    CHECK(all.size() == 3);
    CHECK(all[0].items.size() == 2);
    CHECK(all[0].items[1].line == 2);
    CHECK(all[0].items[0].text() == "Crude oil rallies Prices rose.");
}

TEST_CASE("malformed news lines report their line") {
    try {
        news("{\"date\": \"2020-01-02\", \"headline\": \"x\", \"body\": \"\", \"source\": \"s\"}\nnot json\n", {});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
        CHECK(std::string(e.what()).find(":2") != std::string::npos);
    }
    CHECK_THROWS_AS(news(R"({"date": "2020-02-30", "headline": "x", "body": "", "source": "s"})"
                         "\n",
                         {}),
                    Error);
    CHECK_THROWS_AS(news(R"({"date": "2020-02-03", "headline": "", "body": "b", "source": "s"})"
                         "\n",
                         {}),
                    Error);
}

TEST_CASE("news moves to the next trading day") {
    const auto days = news(kFourItems, {});
    const std::vector<Date> trading{Date(2020, 1, 2), Date(2020, 1, 3)};
    std::size_t dropped = 0;
    const auto aligned = align_to_trading_days(days, trading, &dropped);
    REQUIRE(aligned.size() == 2);
    CHECK(aligned[0].size() == 2);
    CHECK(aligned[1].size() == 1);
    CHECK(dropped == 1);

    const std::vector<Date> with_monday{Date(2020, 1, 2), Date(2020, 1, 3), Date(2020, 1, 6)};
    const auto weekend = align_to_trading_days(days, with_monday);
    CHECK(weekend[2].size() == 1);
    CHECK(weekend[2][0].headline == "Football");
}

TEST_CASE("top items by absolute compound") {
    using sentiment::SentimentVector;
    const std::vector<SentimentVector> s{{0, 1, 0, 0.1}, {0, 1, 0, -0.9}, {0, 1, 0, 0.5}, {0, 1, 0, 0.5}, {0, 1, 0, -0.2}};
    CHECK(top_items_by_sentiment(s, 3) == std::vector<std::size_t>{1, 2, 3});
    CHECK(top_items_by_sentiment(s, 10).size() == 5);
}

TEST_CASE("conllu parsing") {
    std::istringstream in(
        "# newdoc id = a\n# date = 2020-01-02\n# sent_id = 1\n"
        "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
        "2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_\n"
        "3\tsell\tsell\tVERB\t_\t_\t0\troot\t_\tSST=x|SpaceAfter=No\n"
        "3.1\tit\t_\t_\t_\t_\t_\t_\t_\t_\n"
        "\n# newdoc id = b\n1\tOil\toil\tNOUN\t_\t_\t0\troot\t_\t_\n\n");
    const auto docs = text::parse_conllu(in, "x.conllu");
    REQUIRE(docs.size() == 2);
    CHECK(docs[0].id == "a");
    CHECK(docs[0].date == "2020-01-02");
    REQUIRE(docs[0].sentences.size() == 1);
    const auto& s = docs[0].sentences[0];
    CHECK(s.tokens.size() == 3);
    CHECK(s.token(3)->misc_value("SST") == "x");
    CHECK(s.token(3)->misc_value("Missing").empty());
    CHECK(s.token(4) == nullptr);
    CHECK(s.tokens[2].annotated());

    std::istringstream bad("# newdoc id = a\n1\tOil\toil\n");
    CHECK_THROWS_AS(text::parse_conllu(bad, "bad.conllu"), Error);
}

TEST_CASE("generated corpus round trip") {
    const auto dir = testing::scratch_dir("corpus");
    synthetic::MarketOptions o;
    o.num_days = 60;
    const auto corpus = synthetic::generate_market_corpus(o, 5);
    synthetic::write_market_corpus(corpus, dir);

    std::vector<std::string> rejected;
    const auto prices = parse_price_csv(dir / "prices.csv", &rejected);
    CHECK(prices.size() == 60);
    CHECK(rejected.empty());

    const auto manifest = text::read_manifest(dir / "manifest.jsonl");
    CHECK(manifest.size() == corpus.items.size());
    const auto clusters = text::load_annotated_clusters(dir / "manifest.jsonl");
    std::size_t docs = 0;
    for (const auto& [date, d] : clusters) docs += d.size();
    CHECK(docs == manifest.size());

    const auto all_news = parse_news_jsonl(dir / "news.jsonl", {});
    std::set<std::size_t> lines;
    for (const auto& day : all_news) {
        for (const auto& item : day.items) lines.insert(item.line);
    }
    for (const auto& e : manifest) CHECK(lines.contains(e.source_line));
}

TEST_CASE("manifest entries must resolve") {
    const auto dir = testing::scratch_dir("manifest");
    {
        std::ofstream c(dir / "a.conllu");
        c << "# newdoc id = item-1\n1\tOil\toil\tNOUN\t_\t_\t0\troot\t_\t_\n\n";
        std::ofstream m(dir / "manifest.jsonl");
        m << R"({"item_id": "item-1", "date": "2020-01-02", "conllu": "a.conllu", "source_line": 1})" << "\n"
          << R"({"item_id": "item-2", "date": "2020-01-02", "conllu": "a.conllu", "source_line": 2})" << "\n";
    }
    CHECK_THROWS_AS(text::load_annotated_clusters(dir / "manifest.jsonl"), Error);
}
