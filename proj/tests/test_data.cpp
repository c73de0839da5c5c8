#include "doctest.h"

#include "bsp/data.hpp"
#include "bsp/errors.hpp"

#include <cmath>
#include <sstream>
#include <string>

using namespace bsp;

namespace {

const char* kMx =
    "Switzerland, Death rates (period 1x1), \tLast modified: 01 Jan 2020;  Methods Protocol: v6 (2017)\n"
    "\n"
    "  Year          Age             Female            Male           Total\n"
    "  1933            0           0.062463          0.078204          0.070504\n"
    "  1933            1           .                 0.005000          0.004500\n"
    "  1933          110+          0.500000          0.600000          0.550000\n"
    "  1934            0           0.060000          0.070000          0.065000\n"
    "  1934            1           0.004000          0.004800          0.004400\n"
    "  1934          110+          0.510000          0.610000          0.560000\n";

std::string full_table(const std::string& title, double base) {
    std::ostringstream out;
    out << title << "\n\n  Year          Age             Female            Male           Total\n";
    for (int year = 2000; year <= 2002; ++year) {
        for (int age = 0; age <= 110; ++age) {
            const std::string a = age == 110 ? "110+" : std::to_string(age);
            out << "  " << year << "  " << a << "  " << base * (age + 1) << "  " << 2 * base * (age + 1) << "  "
                << 3 * base * (age + 1) << "\n";
        }
    }
    return out.str();
}

// Rates table written out from deaths and exposures tables.
std::string rates_table(const HmdTable& deaths, const HmdTable& expo) {
    std::ostringstream out;
    out << "Mx\n\n  Year          Age             Female            Male           Total\n";
    for (std::size_t y = 0; y < deaths.years.size(); ++y) {
        for (std::size_t a = 0; a < deaths.ages.size(); ++a) {
            const auto i = static_cast<Eigen::Index>(a);
            const auto j = static_cast<Eigen::Index>(y);
            out << "  " << deaths.years[y] << "  " << deaths.ages[a] << (deaths.ages[a] == 110 ? "+" : "") << "  "
                << format_double(deaths.female(i, j) / expo.female(i, j)) << "  "
                << format_double(deaths.male(i, j) / expo.male(i, j)) << "  "
                << format_double(deaths.total(i, j) / expo.total(i, j)) << "\n";
        }
    }
    return out.str();
}

} // namespace

TEST_CASE("parse an HMD rates table") {
    const HmdTable t = parse_hmd_table(std::string_view(kMx), HmdKind::Mx);
    REQUIRE(t.years.size() == 2);
    REQUIRE(t.ages.size() == 3);
    CHECK(t.ages.back() == 110);
    CHECK(*t.value(Gender::Female, 1933, 0) == 0.062463);
    CHECK(*t.value(Gender::Male, 1933, 0) == 0.078204);
    CHECK_FALSE(t.value(Gender::Female, 1933, 1).has_value());
    CHECK(*t.value(Gender::Male, 1933, 1) == 0.005);
    CHECK(std::isnan(t.female(1, 0)));
}

TEST_CASE("all 111 ages are kept before truncation") {
    const HmdTable t = parse_hmd_table(full_table("Deaths", 1.0), HmdKind::Deaths);
    CHECK(t.ages.size() == 111);
    CHECK(t.years.size() == 3);
}

TEST_CASE("malformed rows report their line") {
    const std::string bad = "title\n\n  Year Age Female Male Total\n  1933 0 0.1 0.2 0.3\n  1933 1 0.1 0.2\n";
    try {
        parse_hmd_table(bad, HmdKind::Mx);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 5);
    }
    const std::string junk = "title\n\n  Year Age Female Male Total\n  1933 0 abc 0.2 0.3\n";
    CHECK_THROWS_AS(parse_hmd_table(junk, HmdKind::Mx), ParseError);
    const std::string header = "title\n\n  Year Age Female Male\n";
    CHECK_THROWS_AS(parse_hmd_table(header, HmdKind::Mx), ParseError);
}

TEST_CASE("territorial-change year suffixes") {
    const std::string text =
        "t\n\n  Year Age Female Male Total\n"
        "  1914- 0 0.1 0.2 0.3\n"
        "  1914+ 0 0.4 0.5 0.6\n"
        "  1915 0 0.7 0.8 0.9\n";
    const HmdTable t = parse_hmd_table(text, HmdKind::Mx);
    REQUIRE(t.years.size() == 2);
    CHECK(*t.value(Gender::Female, 1914, 0) == 0.4);
}

TEST_CASE("surface from deaths and exposures") {
    const HmdTable deaths = parse_hmd_table(full_table("Deaths", 2.0), HmdKind::Deaths);
    HmdTable expo = parse_hmd_table(full_table("Exposures", 1000.0), HmdKind::Exposures);
    HmdTable d2 = deaths;
    d2.female(5, 1) = 0.0;   // zero deaths at age 5 in 2001
    SurfaceSource src;
    src.deaths = &d2;
    src.exposures = &expo;
    const MortalitySurface s = build_surface(src, Gender::Female, 100, std::nullopt, "XYZ");
    CHECK(s.k() == 101);
    CHECK(s.n() == 3);
    CHECK(s.country_code == "XYZ");
    CHECK_FALSE(s.observed(5, 1));
    CHECK(std::isnan(s.log_rates(5, 1)));
    CHECK(s.observed(6, 1));
    CHECK(s.log_rates(6, 1) == doctest::Approx(std::log(2.0 * 7 / (1000.0 * 7))).epsilon(1e-12));

    const MortalitySurface sub = build_surface(src, Gender::Male, 100, std::pair{2001, 2002});
    CHECK(sub.years == std::vector<int>{2001, 2002});
    CHECK_THROWS_AS(build_surface(src, Gender::Male, 100, std::pair{1950, 1960}), InputError);
}

TEST_CASE("rates agree with deaths over exposures") {
    const HmdTable deaths = parse_hmd_table(full_table("Deaths", 2.0), HmdKind::Deaths);
    const HmdTable expo = parse_hmd_table(full_table("Exposures", 1000.0), HmdKind::Exposures);
    const HmdTable mx = parse_hmd_table(rates_table(deaths, expo), HmdKind::Mx);
    CHECK(max_rate_discrepancy(mx, deaths, expo, Gender::Female) < 1e-6);
    SurfaceSource only_mx;
    only_mx.mx = &mx;
    const MortalitySurface s = build_surface(only_mx, Gender::Female);
    CHECK(s.log_rates(0, 0) == doctest::Approx(std::log(0.002)));
}

TEST_CASE("CSV round trip is exact") {
    const HmdTable deaths = parse_hmd_table(full_table("Deaths", 2.0 / 3.0), HmdKind::Deaths);
    HmdTable expo = parse_hmd_table(full_table("Exposures", 1000.0 / 7.0), HmdKind::Exposures);
    expo.male(10, 2) = std::nan("");
    SurfaceSource src;
    src.deaths = &deaths;
    src.exposures = &expo;
    const MortalitySurface s = build_surface(src, Gender::Male, 100, std::nullopt, "ABC");
    std::stringstream buf;
    write_surface_csv(buf, s);
    CHECK(buf.str().rfind("year,age,deaths,exposure,log_rate,observed_flag\n", 0) == 0);
    const MortalitySurface back = read_surface_csv(buf, Gender::Male, "ABC");
    CHECK(same_surface(s, back));
    CHECK_FALSE(back.observed(10, 2));
}

TEST_CASE("truncation and lookups") {
    const HmdTable deaths = parse_hmd_table(full_table("Deaths", 2.0), HmdKind::Deaths);
    const HmdTable expo = parse_hmd_table(full_table("Exposures", 1000.0), HmdKind::Exposures);
    SurfaceSource src;
    src.deaths = &deaths;
    src.exposures = &expo;
    const MortalitySurface s = build_surface(src, Gender::Female, 50);
    CHECK(s.k() == 51);
    const MortalitySurface t = s.truncated(2001);
    CHECK(t.n() == 2);
    CHECK(*s.year_index(2002) == 2);
    CHECK_FALSE(s.year_index(1999).has_value());
    const ObservationSeries obs = s.observations();
    CHECK(obs.values.rows() == 51);
    CHECK(parse_gender("f") == Gender::Female);
    CHECK(parse_gender("male") == Gender::Male);
    CHECK_THROWS(parse_gender("x"));
}

TEST_CASE("shortest round-trip formatting") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.5e-7) == "-2.5e-07");
    const double x = 1.0 / 3.0;
    CHECK(std::stod(format_double(x)) == x);
}
