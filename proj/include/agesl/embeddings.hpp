#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace agesl::text {

/// Word vectors read from the plain text format: one token per line followed
/// by D whitespace-separated reals. Lines starting with '#' are comments.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    explicit EmbeddingTable(int dim) : dim_(dim) {}

    /// `expected_dim` of 0 takes the dimension from the first entry.
    static EmbeddingTable load(const std::filesystem::path& path, int expected_dim = 0);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return index_.size(); }
    bool contains(std::string_view token) const;

    void add(const std::string& token, const Eigen::VectorXd& vec);
    /// Exact match first, then the ASCII-lowercased token; zero vector if neither.
    Eigen::VectorXd lookup(std::string_view token) const;
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    int dim_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> tokens_;
    std::vector<Eigen::VectorXd> vectors_;
};

std::string ascii_lower(std::string_view s);

}  // namespace agesl::text
