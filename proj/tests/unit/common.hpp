#pragma once

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testing {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(AGESL_FIXTURE_DIR) / name; }

inline nlohmann::json load_json(const std::string& name) {
    std::ifstream in(fixture(name));
    REQUIRE(in);
    return nlohmann::json::parse(in);
}

inline std::vector<double> normals(std::size_t n, std::uint64_t seed, double sd = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, sd);
    std::vector<double> out(n);
    for (auto& x : out) x = z(rng);
    return out;
}

inline std::vector<double> ar1(std::size_t n, double phi, std::uint64_t seed) {
    const auto e = normals(n, seed);
    std::vector<double> out(n, 0.0);
    for (std::size_t t = 1; t < n; ++t) out[t] = phi * out[t - 1] + e[t];
    return out;
}

inline std::vector<double> random_walk(std::size_t n, std::uint64_t seed, double start = 60.0) {
    const auto e = normals(n, seed);
    std::vector<double> out(n);
    double level = start;
    for (std::size_t t = 0; t < n; ++t) out[t] = level += e[t];
    return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("agesl-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
