#pragma once

#include "cob/error.hpp"

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

namespace cob {

/// Calendar day, stored as days since 1970-01-01.
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::chrono::sys_days d) : days_(d.time_since_epoch().count()) {}
    constexpr Date(int y, unsigned m, unsigned d)
        : Date(std::chrono::sys_days{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}}) {}

    static constexpr Date from_serial(long serial) {
        Date out;
        out.days_ = serial;
        return out;
    }

    constexpr long serial() const noexcept { return days_; }
    constexpr std::chrono::sys_days sys_days() const noexcept {
        return std::chrono::sys_days{std::chrono::days{days_}};
    }
    constexpr std::chrono::year_month_day ymd() const noexcept { return std::chrono::year_month_day{sys_days()}; }

    /// 0 = Monday ... 6 = Sunday.
    constexpr unsigned iso_weekday_index() const noexcept {
        return std::chrono::weekday{sys_days()}.iso_encoding() - 1;
    }

    constexpr Date plus_days(long n) const noexcept { return from_serial(days_ + n); }

    /// Throws std::invalid_argument on anything but YYYY-MM-DD naming a real day.
    static Date parse(std::string_view text) {
        auto fail = [&] { throw std::invalid_argument("malformed date '" + std::string(text) + "'"); };
        if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
        int y = 0;
        unsigned m = 0;
        unsigned d = 0;
        auto num = [&](std::size_t pos, std::size_t len, auto& out) {
            auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
            if (ec != std::errc{} || p != text.data() + pos + len) fail();
        };
        num(0, 4, y);
        num(5, 2, m);
        num(8, 2, d);
        std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
        if (!ymd.ok()) fail();
        return Date(std::chrono::sys_days{ymd});
    }

    std::string to_string() const {
        auto v = ymd();
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()), static_cast<unsigned>(v.month()),
                      static_cast<unsigned>(v.day()));
        return buf;
    }

    friend constexpr auto operator<=>(const Date&, const Date&) = default;

private:
    long days_ = 0;
};

/// Serial of the Monday starting this date's ISO week; unique per ISO week.
constexpr long iso_week_key(Date d) noexcept { return d.serial() - d.iso_weekday_index(); }

/// year * 12 + month index; unique per calendar month.
constexpr long month_key(Date d) noexcept {
    auto v = d.ymd();
    return static_cast<long>(static_cast<int>(v.year())) * 12 + static_cast<long>(static_cast<unsigned>(v.month())) - 1;
}

/// Two-calendar-day bins anchored at the Unix epoch.
constexpr long two_day_key(Date d) noexcept {
    long s = d.serial();
    return s >= 0 ? s / 2 : -((-s + 1) / 2);
}

}  // namespace cob
