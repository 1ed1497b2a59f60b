// Regenerates the bundled synthetic market corpus.

#include "agesl/error.hpp"
#include "agesl/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic oil-market corpus (prices, news, parses, embeddings)"};
    std::string out = "data/synthetic";
    std::uint64_t seed = 2024;
    agesl::synthetic::MarketOptions options;
    app.add_option("--out", out, "Output directory");
    app.add_option("--seed", seed, "Generator seed");
    app.add_option("--days", options.num_days, "Number of trading days");
    app.add_option("--kappa", options.kappa, "Sentiment-volatility loading");
    app.add_option("--rebound", options.rebound, "Loading on the size of the previous move");
    app.add_option("--omega", options.omega, "GARCH intercept");
    app.add_option("--ar", options.ar, "AR loading on the previous move");
    app.add_option("--effect-scale", options.effect_scale, "Multiplier on event effects");
    CLI11_PARSE(app, argc, argv);
    try {
        const auto corpus = agesl::synthetic::generate_market_corpus(options, seed);
        agesl::synthetic::write_market_corpus(corpus, out);
        std::cout << corpus.prices.size() << " trading days, " << corpus.items.size() << " news items, "
                  << corpus.embeddings.size() << " embedded words written to " << out << '\n';
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
