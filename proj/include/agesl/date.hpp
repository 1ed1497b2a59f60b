#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace agesl {

/// Proleptic Gregorian calendar date.
class Date {
public:
    constexpr Date() = default;
    Date(int year, unsigned month, unsigned day);

    /// Parses `YYYY-MM-DD`. Returns nullopt on anything else, including
    /// impossible dates such as 2021-02-30.
    static std::optional<Date> parse(std::string_view text);
    static Date from_days(std::int64_t days_since_epoch);

    int year() const noexcept { return year_; }
    unsigned month() const noexcept { return month_; }
    unsigned day() const noexcept { return day_; }

    std::int64_t days_since_epoch() const noexcept;
    std::string iso() const;

    auto operator<=>(const Date&) const = default;

private:
    int year_ = 1970;
    unsigned month_ = 1;
    unsigned day_ = 1;
};

}  // namespace agesl
