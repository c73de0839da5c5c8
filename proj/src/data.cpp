#include "bsp/data.hpp"

#include "bsp/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bsp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
        }
        if (i > start) {
            tokens.push_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return fields;
}

std::optional<int> to_int(std::string_view text) {
    int value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

std::optional<double> to_double(std::string_view text) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

std::string_view strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    return line;
}

struct HmdRow {
    double female;
    double male;
    double total;
};

double parse_cell(std::string_view token, std::size_t line) {
    if (token == ".") {
        return kNaN;
    }
    const auto value = to_double(token);
    if (!value) {
        throw ParseError("invalid numeric value '" + std::string(token) + "'", line);
    }
    return *value;
}

} // namespace

Gender parse_gender(std::string_view text) {
    if (text == "f" || text == "female" || text == "F" || text == "Female") {
        return Gender::Female;
    }
    if (text == "m" || text == "male" || text == "M" || text == "Male") {
        return Gender::Male;
    }
    throw std::invalid_argument("gender must be 'f' or 'm', got '" + std::string(text) + "'");
}

std::string to_string(Gender gender) {
    return gender == Gender::Female ? "female" : "male";
}

std::optional<double> HmdTable::value(Gender gender, int year, int age) const {
    const auto y = std::find(years.begin(), years.end(), year);
    const auto a = std::find(ages.begin(), ages.end(), age);
    if (y == years.end() || a == ages.end()) {
        return std::nullopt;
    }
    const double v = grid(gender)(a - ages.begin(), y - years.begin());
    if (!std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

HmdTable parse_hmd_table(std::istream& in, HmdKind kind) {
    std::map<int, std::map<int, HmdRow>> rows;
    std::set<std::pair<int, int>> from_plus;
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = strip_cr(raw);
        const auto tokens = split_whitespace(line);
        if (!header_seen) {
            if (!tokens.empty() && tokens.front() == "Year") {
                if (tokens.size() != 5) {
                    throw ParseError("column header must list Year, Age, Female, Male, Total", line_no);
                }
                header_seen = true;
            }
            continue;
        }
        if (tokens.empty()) {
            continue;
        }
        if (tokens.size() != 5) {
            throw ParseError("expected 5 columns, found " + std::to_string(tokens.size()), line_no);
        }
        std::string_view year_token = tokens[0];
        char suffix = '\0';
        if (!year_token.empty() && (year_token.back() == '+' || year_token.back() == '-')) {
            suffix = year_token.back();
            year_token.remove_suffix(1);
        }
        const auto year = to_int(year_token);
        if (!year) {
            throw ParseError("invalid year '" + std::string(tokens[0]) + "'", line_no);
        }
        std::string_view age_token = tokens[1];
        if (!age_token.empty() && age_token.back() == '+') {
            age_token.remove_suffix(1);
        }
        const auto age = to_int(age_token);
        if (!age || *age < 0) {
            throw ParseError("invalid age '" + std::string(tokens[1]) + "'", line_no);
        }
        const HmdRow row{parse_cell(tokens[2], line_no), parse_cell(tokens[3], line_no),
                         parse_cell(tokens[4], line_no)};
        if (suffix == '-') {
            continue;
        }
        const auto key = std::make_pair(*year, *age);
        if (suffix == '+') {
            from_plus.insert(key);
        } else if (from_plus.count(key)) {
            continue;
        }
        rows[*year][*age] = row;
    }
    if (!header_seen) {
        throw ParseError("no 'Year Age Female Male Total' header found", line_no);
    }

    HmdTable table;
    table.kind = kind;
    std::set<int> ages;
    for (const auto& [year, by_age] : rows) {
        table.years.push_back(year);
        for (const auto& [age, row] : by_age) {
            ages.insert(age);
        }
    }
    table.ages.assign(ages.begin(), ages.end());
    const auto k = static_cast<Eigen::Index>(table.ages.size());
    const auto n = static_cast<Eigen::Index>(table.years.size());
    table.female = Eigen::MatrixXd::Constant(k, n, kNaN);
    table.male = Eigen::MatrixXd::Constant(k, n, kNaN);
    table.total = Eigen::MatrixXd::Constant(k, n, kNaN);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (const auto& [age, row] : rows[table.years[s]]) {
            const auto i = std::lower_bound(table.ages.begin(), table.ages.end(), age) - table.ages.begin();
            table.female(i, s) = row.female;
            table.male(i, s) = row.male;
            table.total(i, s) = row.total;
        }
    }
    return table;
}

HmdTable parse_hmd_table(std::string_view text, HmdKind kind) {
    std::istringstream in{std::string(text)};
    return parse_hmd_table(in, kind);
}

std::vector<double> MortalitySurface::age_values() const {
    return std::vector<double>(ages.begin(), ages.end());
}

ObservationSeries MortalitySurface::observations() const {
    ObservationSeries obs;
    obs.values = log_rates;
    obs.observed = observed;
    for (Eigen::Index s = 0; s < obs.values.cols(); ++s) {
        for (Eigen::Index i = 0; i < obs.values.rows(); ++i) {
            if (!obs.observed(i, s)) {
                obs.values(i, s) = 0.0;
            }
        }
    }
    return obs;
}

std::optional<std::size_t> MortalitySurface::year_index(int year) const {
    const auto it = std::find(years.begin(), years.end(), year);
    if (it == years.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - years.begin());
}

MortalitySurface MortalitySurface::truncated(int last_year) const {
    const auto count = static_cast<Eigen::Index>(
        std::upper_bound(years.begin(), years.end(), last_year) - years.begin());
    MortalitySurface out;
    out.ages = ages;
    out.years.assign(years.begin(), years.begin() + count);
    out.deaths = deaths.leftCols(count);
    out.exposures = exposures.leftCols(count);
    out.log_rates = log_rates.leftCols(count);
    out.observed = observed.leftCols(count);
    out.gender = gender;
    out.country_code = country_code;
    return out;
}

MortalitySurface build_surface(const SurfaceSource& source, Gender gender, int age_cap,
                               std::optional<std::pair<int, int>> year_range, std::string country_code) {
    const bool counts = source.deaths != nullptr && source.exposures != nullptr;
    if (!counts && source.mx == nullptr) {
        throw InputError("surface needs Mx, or Deaths together with Exposures");
    }
    if (age_cap < 0) {
        throw InputError("age cap must be nonnegative");
    }
    std::vector<const HmdTable*> tables;
    if (counts) {
        tables = {source.deaths, source.exposures};
    } else {
        tables = {source.mx};
    }

    std::vector<int> years = tables.front()->years;
    for (const HmdTable* t : tables) {
        std::vector<int> keep;
        std::set_intersection(years.begin(), years.end(), t->years.begin(), t->years.end(),
                              std::back_inserter(keep));
        years = std::move(keep);
    }
    if (year_range) {
        std::erase_if(years, [&](int y) { return y < year_range->first || y > year_range->second; });
    }
    if (years.empty()) {
        throw InputError("requested years do not overlap the supplied tables");
    }

    MortalitySurface surface;
    surface.gender = gender;
    surface.country_code = std::move(country_code);
    surface.years = years;
    for (int a = 0; a <= age_cap; ++a) {
        surface.ages.push_back(a);
    }
    const auto k = static_cast<Eigen::Index>(surface.ages.size());
    const auto n = static_cast<Eigen::Index>(years.size());
    surface.deaths = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.exposures = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.log_rates = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, n, false);

    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const int year = years[s];
            const int age = surface.ages[i];
            if (counts) {
                const auto d = source.deaths->value(gender, year, age);
                const auto e = source.exposures->value(gender, year, age);
                surface.deaths(i, s) = d.value_or(kNaN);
                surface.exposures(i, s) = e.value_or(kNaN);
                if (d && e && *d > 0.0 && *e > 0.0) {
                    surface.log_rates(i, s) = std::log(*d / *e);
                    surface.observed(i, s) = true;
                }
            } else {
                const auto m = source.mx->value(gender, year, age);
                if (m && *m > 0.0) {
                    surface.log_rates(i, s) = std::log(*m);
                    surface.observed(i, s) = true;
                }
            }
        }
    }
    return surface;
}

double max_rate_discrepancy(const HmdTable& mx, const HmdTable& deaths, const HmdTable& exposures,
                            Gender gender, int age_cap) {
    double worst = 0.0;
    for (int year : mx.years) {
        for (int age : mx.ages) {
            if (age > age_cap) {
                continue;
            }
            const auto m = mx.value(gender, year, age);
            const auto d = deaths.value(gender, year, age);
            const auto e = exposures.value(gender, year, age);
            if (!m || !d || !e || *m <= 0.0 || *e <= 0.0) {
                continue;
            }
            worst = std::max(worst, std::abs(*d / *e - *m) / *m);
        }
    }
    return worst;
}

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) {
        throw std::runtime_error("failed to format number");
    }
    return std::string(buffer, ptr);
}

void write_surface_csv(std::ostream& out, const MortalitySurface& surface) {
    const auto cell = [](double v) { return std::isfinite(v) ? format_double(v) : std::string(); };
    out << "year,age,deaths,exposure,log_rate,observed_flag\n";
    for (std::size_t s = 0; s < surface.n(); ++s) {
        for (std::size_t i = 0; i < surface.k(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            const auto c = static_cast<Eigen::Index>(s);
            out << surface.years[s] << ',' << surface.ages[i] << ',' << cell(surface.deaths(r, c)) << ','
                << cell(surface.exposures(r, c)) << ','
                << (surface.observed(r, c) ? cell(surface.log_rates(r, c)) : std::string()) << ','
                << (surface.observed(r, c) ? 1 : 0) << '\n';
        }
    }
}

MortalitySurface read_surface_csv(std::istream& in, Gender gender, std::string country_code) {
    struct Cell {
        double deaths = kNaN;
        double exposure = kNaN;
        double log_rate = kNaN;
        bool observed = false;
    };
    std::map<std::pair<int, int>, Cell> cells;
    std::set<int> years;
    std::set<int> ages;
    std::string raw;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = strip_cr(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!header) {
            if (line != "year,age,deaths,exposure,log_rate,observed_flag") {
                throw ParseError("unexpected surface CSV header", line_no);
            }
            header = true;
            continue;
        }
        const auto fields = split_commas(line);
        if (fields.size() != 6) {
            throw ParseError("expected 6 fields, found " + std::to_string(fields.size()), line_no);
        }
        const auto year = to_int(fields[0]);
        const auto age = to_int(fields[1]);
        if (!year || !age) {
            throw ParseError("invalid year or age", line_no);
        }
        const auto optional_number = [&](std::string_view f) {
            if (f.empty()) {
                return kNaN;
            }
            const auto v = to_double(f);
            if (!v) {
                throw ParseError("invalid number '" + std::string(f) + "'", line_no);
            }
            return *v;
        };
        Cell cell;
        cell.deaths = optional_number(fields[2]);
        cell.exposure = optional_number(fields[3]);
        cell.log_rate = optional_number(fields[4]);
        if (fields[5] != "0" && fields[5] != "1") {
            throw ParseError("observed_flag must be 0 or 1", line_no);
        }
        cell.observed = fields[5] == "1";
        if (cell.observed && !std::isfinite(cell.log_rate)) {
            throw ParseError("observed cell without a log-rate", line_no);
        }
        years.insert(*year);
        ages.insert(*age);
        cells[{*year, *age}] = cell;
    }
    if (!header) {
        throw ParseError("empty surface CSV", line_no);
    }

    MortalitySurface surface;
    surface.gender = gender;
    surface.country_code = std::move(country_code);
    surface.years.assign(years.begin(), years.end());
    surface.ages.assign(ages.begin(), ages.end());
    const auto k = static_cast<Eigen::Index>(surface.ages.size());
    const auto n = static_cast<Eigen::Index>(surface.years.size());
    surface.deaths = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.exposures = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.log_rates = Eigen::MatrixXd::Constant(k, n, kNaN);
    surface.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, n, false);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto it = cells.find({surface.years[s], surface.ages[i]});
            if (it == cells.end()) {
                continue;
            }
            surface.deaths(i, s) = it->second.deaths;
            surface.exposures(i, s) = it->second.exposure;
            if (it->second.observed) {
                surface.log_rates(i, s) = it->second.log_rate;
                surface.observed(i, s) = true;
            }
        }
    }
    return surface;
}

bool same_surface(const MortalitySurface& a, const MortalitySurface& b) {
    const auto same_grid = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
        if (x.rows() != y.rows() || x.cols() != y.cols()) {
            return false;
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double u = x.data()[i];
            const double v = y.data()[i];
            if (!(u == v || (std::isnan(u) && std::isnan(v)))) {
                return false;
            }
        }
        return true;
    };
    return a.ages == b.ages && a.years == b.years && a.gender == b.gender &&
           a.country_code == b.country_code && same_grid(a.deaths, b.deaths) &&
           same_grid(a.exposures, b.exposures) && same_grid(a.log_rates, b.log_rates) &&
           (a.observed == b.observed).all();
}

} // namespace bsp
