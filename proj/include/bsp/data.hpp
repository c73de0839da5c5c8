#pragma once

#include "bsp/statespace.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bsp {

enum class Gender { Female, Male };
enum class HmdKind { Mx, Deaths, Exposures };

Gender parse_gender(std::string_view text);
std::string to_string(Gender gender);

/**
 * One Human Mortality Database 1x1 period table. Grids are ages x years with NaN for
 * missing cells; the open age group "110+" is stored as age 110.
 */
struct HmdTable {
    HmdKind kind = HmdKind::Mx;
    std::vector<int> years;
    std::vector<int> ages;
    Eigen::MatrixXd female;
    Eigen::MatrixXd male;
    Eigen::MatrixXd total;

    const Eigen::MatrixXd& grid(Gender gender) const { return gender == Gender::Female ? female : male; }
    std::optional<double> value(Gender gender, int year, int age) const;
};

/**
 * Parses the HMD text layout: a title line, a column header starting with "Year", then rows
 * `Year Age Female Male Total`. "." marks a missing value. Year tokens carrying a
 * territorial-change suffix are accepted: "1914+" is read as 1914 and "1914-" rows are
 * dropped in favour of the "+" row.
 */
HmdTable parse_hmd_table(std::istream& in, HmdKind kind);
HmdTable parse_hmd_table(std::string_view text, HmdKind kind);

/// Ages x years mortality surface; log-rate cells are valid only where `observed` is set.
struct MortalitySurface {
    std::vector<int> ages;
    std::vector<int> years;
    Eigen::MatrixXd deaths;       // NaN when unknown
    Eigen::MatrixXd exposures;    // NaN when unknown
    Eigen::MatrixXd log_rates;    // NaN where missing
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;
    Gender gender = Gender::Female;
    std::string country_code;

    std::size_t k() const { return ages.size(); }
    std::size_t n() const { return years.size(); }
    std::vector<double> age_values() const;
    std::vector<double> lags() const { return lags_from_years(years); }
    ObservationSeries observations() const;

    /// Columns with year <= last_year.
    MortalitySurface truncated(int last_year) const;
    /// Column index of `year`, if present.
    std::optional<std::size_t> year_index(int year) const;
};

/// Source tables for one surface: either Mx, or Deaths with Exposures (or all three).
struct SurfaceSource {
    const HmdTable* mx = nullptr;
    const HmdTable* deaths = nullptr;
    const HmdTable* exposures = nullptr;
};

/**
 * Builds a surface over ages 0..age_cap and the requested years. Log-rates come from
 * deaths / exposures when both are supplied, otherwise from Mx. Cells with zero deaths,
 * zero exposure, nonpositive rate or a missing input are marked missing.
 */
MortalitySurface build_surface(const SurfaceSource& source, Gender gender, int age_cap = 100,
                               std::optional<std::pair<int, int>> year_range = std::nullopt,
                               std::string country_code = {});

/// Largest relative gap |d/E - Mx| / Mx over cells where all three tables are present.
double max_rate_discrepancy(const HmdTable& mx, const HmdTable& deaths, const HmdTable& exposures,
                            Gender gender, int age_cap = 100);

/// Interchange CSV: year,age,deaths,exposure,log_rate,observed_flag (empty field = missing).
/// Lines starting with '#' are ignored on reading.
void write_surface_csv(std::ostream& out, const MortalitySurface& surface);
MortalitySurface read_surface_csv(std::istream& in, Gender gender, std::string country_code = {});

/// Shortest decimal text that reads back to exactly `value`.
std::string format_double(double value);

/// Cell-by-cell equality, treating NaN as equal to NaN.
bool same_surface(const MortalitySurface& a, const MortalitySurface& b);

} // namespace bsp
