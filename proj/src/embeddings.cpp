#include "agesl/embeddings.hpp"
#include "agesl/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace agesl::text {

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path, int expected_dim) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open embedding file " + path.string());
    EmbeddingTable table(expected_dim);
    std::string line;
    std::size_t lineno = 0;
    std::vector<double> values;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string token;
        fields >> token;
        values.clear();
        std::string field;
        while (fields >> field) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
            if (ec != std::errc{} || ptr != field.data() + field.size()) {
                throw Error(ErrorKind::Parse,
                            path.string() + ":" + std::to_string(lineno) + ": not a number: '" + field + "'");
            }
            values.push_back(v);
        }
        if (table.dim_ == 0) table.dim_ = static_cast<int>(values.size());
        if (values.empty() || static_cast<int>(values.size()) != table.dim_) {
            throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) + ": expected " +
                                              std::to_string(table.dim_) + " values for '" + token + "', found " +
                                              std::to_string(values.size()));
        }
        table.add(token, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return table;
}

bool EmbeddingTable::contains(std::string_view token) const { return index_.contains(std::string(token)); }

void EmbeddingTable::add(const std::string& token, const Eigen::VectorXd& vec) {
    if (dim_ == 0) dim_ = static_cast<int>(vec.size());
    if (vec.size() != dim_) throw Error(ErrorKind::Range, "embedding for '" + token + "' has the wrong dimension");
    if (const auto it = index_.find(token); it != index_.end()) {
        vectors_[it->second] = vec;
        return;
    }
    index_.emplace(token, tokens_.size());
    tokens_.push_back(token);
    vectors_.push_back(vec);
}

Eigen::VectorXd EmbeddingTable::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) it = index_.find(ascii_lower(token));
    if (it == index_.end()) return Eigen::VectorXd::Zero(dim_);
    return vectors_[it->second];
}

}  // namespace agesl::text
