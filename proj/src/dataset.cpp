#include "longmix/dataset.hpp"

#include "longmix/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace longmix {

namespace {

constexpr std::array<std::string_view, 6> kColumns = {
    "subject_id", "day", "time_point", "hour_actual", "smoker", "fev1"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

// Splits one CSV record; double quotes may wrap a field.
std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.emplace_back(trim(cur));
    return fields;
}

std::string where(std::size_t line, std::string_view column) {
    return "line " + std::to_string(line) + ", column '" + std::string(column) + "'";
}

int parse_int(std::string_view text, std::size_t line, std::string_view column) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw Error(Errc::UnparseableValue,
                    where(line, column) + ": expected an integer, got '" + std::string(text) + "'");
    return value;
}

double parse_real(std::string_view text, std::size_t line, std::string_view column) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
        throw Error(Errc::UnparseableValue,
                    where(line, column) + ": expected a number, got '" + std::string(text) + "'");
    return value;
}

bool parse_bool(std::string_view text, std::size_t line, std::string_view column) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "1" || lower == "true") return true;
    if (lower == "0" || lower == "false") return false;
    throw Error(Errc::UnparseableValue,
                where(line, column) + ": expected 0/1/true/false, got '" + std::string(text) + "'");
}

bool all_digits(std::string_view s) {
    return !s.empty() && s.size() < 19 &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool row_less(const Observation& a, const Observation& b) {
    if (a.subject_id != b.subject_id) return subject_less(a.subject_id, b.subject_id);
    if (a.day != b.day) return a.day < b.day;
    return a.time_point < b.time_point;
}

std::string format_triple(const Observation& o) {
    return "(" + o.subject_id + ", day " + std::to_string(o.day) + ", time_point " +
           std::to_string(o.time_point) + ")";
}

}  // namespace

bool subject_less(std::string_view a, std::string_view b) {
    const bool na = all_digits(a), nb = all_digits(b);
    if (na && nb) {
        auto strip = [](std::string_view s) {
            while (s.size() > 1 && s.front() == '0') s.remove_prefix(1);
            return s;
        };
        auto sa = strip(a), sb = strip(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
        return a < b;
    }
    if (na != nb) return na;  // numeric ids first
    return a < b;
}

LongDataset make_dataset(std::vector<Observation> rows, std::string response_name) {
    for (const auto& o : rows) {
        if (o.subject_id.empty())
            throw Error(Errc::InvalidValue, "empty subject_id");
        if (o.day < 1 || o.day > 3)
            throw Error(Errc::InvalidValue, format_triple(o) + ": day must be 1, 2 or 3");
        if (o.time_point < 0 || o.time_point > 6)
            throw Error(Errc::InvalidValue, format_triple(o) + ": time_point must lie in 0..6");
        if (!std::isfinite(o.response))
            throw Error(Errc::InvalidValue, format_triple(o) + ": response is not finite");
        if (!std::isfinite(o.hour_actual) || o.hour_actual < 0)
            throw Error(Errc::InvalidValue,
                        format_triple(o) + ": hour_actual must be finite and non-negative");
    }
    std::stable_sort(rows.begin(), rows.end(), row_less);

    LongDataset data;
    data.response_name = std::move(response_name);
    std::set<int> days, tps;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& o = rows[i];
        if (i > 0) {
            const auto& prev = rows[i - 1];
            if (prev.subject_id == o.subject_id && prev.day == o.day &&
                prev.time_point == o.time_point)
                throw Error(Errc::DuplicateTriple, "duplicate row " + format_triple(o));
            if (prev.subject_id == o.subject_id && prev.smoker != o.smoker)
                throw Error(Errc::NonConstantSmoker,
                            "smoker flag changes within subject '" + o.subject_id + "' at " +
                                format_triple(o));
        }
        if (data.subjects.empty() || data.subjects.back() != o.subject_id)
            data.subjects.push_back(o.subject_id);
        days.insert(o.day);
        tps.insert(o.time_point);
    }
    data.days.assign(days.begin(), days.end());
    data.time_points.assign(tps.begin(), tps.end());
    data.rows = std::move(rows);
    return data;
}

LongDataset parse_long_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
            line.erase(0, 3);
        if (!trim(line).empty()) {
            header = split_record(line);
            break;
        }
    }
    if (header.empty()) throw Error(Errc::MissingColumn, "input has no header row");

    std::array<std::size_t, kColumns.size()> index{};
    for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), kColumns[c]);
        if (it == header.end())
            throw Error(Errc::MissingColumn, "header lacks column '" + std::string(kColumns[c]) + "'");
        if (std::find(it + 1, header.end(), kColumns[c]) != header.end())
            throw Error(Errc::InvalidValue, "header repeats column '" + std::string(kColumns[c]) + "'");
        index[c] = static_cast<std::size_t>(it - header.begin());
    }
    for (const auto& h : header)
        if (std::find(kColumns.begin(), kColumns.end(), h) == kColumns.end())
            throw Error(Errc::InvalidValue, "unexpected header column '" + h + "'");

    std::vector<Observation> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_record(line);
        if (fields.size() != header.size())
            throw Error(Errc::UnparseableValue, "line " + std::to_string(line_no) + ": expected " +
                                                    std::to_string(header.size()) + " fields, got " +
                                                    std::to_string(fields.size()));
        Observation o;
        o.subject_id = fields[index[0]];
        if (o.subject_id.empty())
            throw Error(Errc::UnparseableValue, where(line_no, "subject_id") + ": empty");
        o.day = parse_int(fields[index[1]], line_no, kColumns[1]);
        o.time_point = parse_int(fields[index[2]], line_no, kColumns[2]);
        o.hour_actual = parse_real(fields[index[3]], line_no, kColumns[3]);
        o.smoker = parse_bool(fields[index[4]], line_no, kColumns[4]);
        o.response = parse_real(fields[index[5]], line_no, kColumns[5]);
        if (o.day < 1 || o.day > 3)
            throw Error(Errc::InvalidValue, where(line_no, "day") + ": must be 1, 2 or 3");
        if (o.time_point < 0 || o.time_point > 6)
            throw Error(Errc::InvalidValue, where(line_no, "time_point") + ": must lie in 0..6");
        if (!std::isfinite(o.response))
            throw Error(Errc::InvalidValue, where(line_no, "fev1") + ": not finite");
        rows.push_back(std::move(o));
    }
    return make_dataset(std::move(rows));
}

LongDataset parse_long_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    return parse_long_csv(in);
}

LongDataset read_long_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
    return parse_long_csv(in);
}

void write_long_csv(std::ostream& out, const LongDataset& data) {
    out << "subject_id,day,time_point,hour_actual,smoker,fev1\n";
    std::ostringstream num;
    num << std::setprecision(17);
    for (const auto& o : data.rows) {
        num.str({});
        num << o.hour_actual << ',' << (o.smoker ? 1 : 0) << ',' << o.response;
        out << o.subject_id << ',' << o.day << ',' << o.time_point << ',' << num.str() << '\n';
    }
}

LongDataset filter_time_points(const LongDataset& data, std::span<const int> keep) {
    std::vector<Observation> rows;
    for (const auto& o : data.rows)
        if (std::find(keep.begin(), keep.end(), o.time_point) != keep.end()) rows.push_back(o);
    if (rows.empty())
        throw Error(Errc::EmptyDataset, "time-point filter removed every row");
    return make_dataset(std::move(rows), data.response_name);
}

LongDataset subset_by_smoker(const LongDataset& data, bool smoker) {
    std::vector<Observation> rows;
    for (const auto& o : data.rows)
        if (o.smoker == smoker) rows.push_back(o);
    return make_dataset(std::move(rows), data.response_name);
}

std::string_view to_string(Grouping g) noexcept {
    return g == Grouping::PerSubject ? "subject" : "subject-day";
}

std::string_view to_string(CorrFamily f) noexcept {
    switch (f) {
    case CorrFamily::AR1: return "ar1";
    case CorrFamily::CompoundSymmetric: return "cs";
    case CorrFamily::Independent: return "independent";
    }
    return "?";
}

std::string_view to_string(Method m) noexcept { return m == Method::REML ? "reml" : "ml"; }

Grouping parse_grouping(std::string_view text) {
    if (text == "subject") return Grouping::PerSubject;
    if (text == "subject-day") return Grouping::PerSubjectDay;
    throw Error(Errc::InvalidSpec, "unknown grouping '" + std::string(text) + "'");
}

CorrFamily parse_corr_family(std::string_view text) {
    if (text == "ar1") return CorrFamily::AR1;
    if (text == "cs") return CorrFamily::CompoundSymmetric;
    if (text == "independent") return CorrFamily::Independent;
    throw Error(Errc::InvalidSpec, "unknown correlation family '" + std::string(text) + "'");
}

Method parse_method(std::string_view text) {
    if (text == "reml") return Method::REML;
    if (text == "ml") return Method::ML;
    throw Error(Errc::InvalidSpec, "unknown method '" + std::string(text) + "'");
}

void ModelSpec::validate() const {
    if (day_hour && !(day && hour))
        throw Error(Errc::InvalidSpec, "day:hour requires both day and hour terms");
    if (poly_degree != 1 && poly_degree != 2)
        throw Error(Errc::InvalidSpec, "poly degree must be 1 or 2");
    if (poly_degree == 2 && !hour)
        throw Error(Errc::InvalidSpec, "hour^2 requires the hour term");
}

bool ModelSpec::same_fixed_effects(const ModelSpec& o) const noexcept {
    return smoker == o.smoker && day == o.day && hour == o.hour && day_hour == o.day_hour &&
           poly_degree == o.poly_degree;
}

ModelSpec with_fixed_terms(ModelSpec base, std::string_view formula) {
    base.smoker = base.day = base.hour = base.day_hour = false;
    std::string compact;
    for (char c : formula)
        if (c != ' ') compact.push_back(c);
    std::size_t start = 0;
    while (start <= compact.size()) {
        auto stop = compact.find('+', start);
        if (stop == std::string::npos) stop = compact.size();
        std::string term = compact.substr(start, stop - start);
        if (term == "1" || term == "intercept") {
        } else if (term == "smoker") {
            base.smoker = true;
        } else if (term == "day") {
            base.day = true;
        } else if (term == "hour") {
            base.hour = true;
        } else if (term == "day*hour" || term == "hour*day") {
            base.day = base.hour = base.day_hour = true;
        } else if (term == "day:hour" || term == "hour:day") {
            base.day_hour = true;
        } else {
            throw Error(Errc::InvalidSpec, "unknown fixed term '" + term + "' in '" +
                                               std::string(formula) + "'");
        }
        start = stop + 1;
    }
    base.validate();
    return base;
}

std::string fixed_formula(const ModelSpec& spec) {
    std::vector<std::string> terms;
    if (spec.day_hour) {
        terms.emplace_back("day*hour");
    } else {
        if (spec.day) terms.emplace_back("day");
        if (spec.hour) terms.emplace_back("hour");
    }
    if (spec.smoker) terms.emplace_back("smoker");
    if (terms.empty()) return "1";
    std::string out = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) out += "+" + terms[i];
    return out;
}

DesignMatrices encode_design(const LongDataset& data, const ModelSpec& spec) {
    spec.validate();
    if (data.empty()) throw Error(Errc::EmptyDataset, "no observations");

    const auto& rows = data.rows;
    if (spec.day && data.days.size() < 2)
        throw Error(Errc::SingleLevelFactor, "day term needs at least two observed days");
    if (spec.hour && data.time_points.size() < 2)
        throw Error(Errc::SingleLevelFactor, "hour term needs at least two observed time points");
    if (spec.smoker) {
        bool any = false, all = true;
        for (const auto& o : rows) {
            any = any || o.smoker;
            all = all && o.smoker;
        }
        if (!any || all)
            throw Error(Errc::SingleLevelFactor, "smoker term needs both smokers and nonsmokers");
    }

    DesignMatrices dm;
    dm.column_names.emplace_back("intercept");
    if (spec.smoker) dm.column_names.emplace_back("smoker");
    // the lowest observed day is the reference level (day 1 on full data)
    std::vector<int> day_levels;
    if (spec.day) {
        day_levels.assign(data.days.begin() + 1, data.days.end());
        for (int d : day_levels) dm.column_names.push_back("day" + std::to_string(d));
    }
    if (spec.hour) dm.column_names.emplace_back("hour");
    if (spec.day_hour)
        for (int d : day_levels) dm.column_names.push_back("day" + std::to_string(d) + ":hour");
    if (spec.poly_degree == 2) dm.column_names.emplace_back("hour^2");

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = static_cast<Eigen::Index>(dm.column_names.size());
    dm.X.setZero(n, p);
    dm.y.resize(n);
    dm.occasion.resize(rows.size());
    dm.hours.resize(rows.size());

    std::map<int, int> rank;
    for (std::size_t i = 0; i < data.time_points.size(); ++i)
        rank[data.time_points[i]] = static_cast<int>(i);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& o = rows[static_cast<std::size_t>(i)];
        const double hour = o.time_point;
        Eigen::Index c = 0;
        dm.X(i, c++) = 1.0;
        if (spec.smoker) dm.X(i, c++) = o.smoker ? 1.0 : 0.0;
        if (spec.day)
            for (int d : day_levels) dm.X(i, c++) = (o.day == d) ? 1.0 : 0.0;
        if (spec.hour) dm.X(i, c++) = hour;
        if (spec.day_hour)
            for (int d : day_levels) dm.X(i, c++) = (o.day == d) ? hour : 0.0;
        if (spec.poly_degree == 2) dm.X(i, c++) = hour * hour;
        dm.y(i) = o.response;
        dm.occasion[static_cast<std::size_t>(i)] = rank.at(o.time_point);
        dm.hours[static_cast<std::size_t>(i)] = o.hour_actual;
    }

    std::size_t subject = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const bool new_subject = i == 0 || rows[i].subject_id != rows[i - 1].subject_id;
        const bool new_series = new_subject || rows[i].day != rows[i - 1].day;
        if (new_subject && i > 0) ++subject;
        if (new_series) {
            if (!dm.series.empty()) dm.series.back().end = i;
            dm.series.push_back({i, i, subject, rows[i].day});
        }
        const bool new_group =
            spec.grouping == Grouping::PerSubject ? new_subject : new_series;
        if (new_group) {
            if (!dm.groups.empty()) {
                dm.groups.back().end = i;
                dm.groups.back().last_series = dm.series.size() - 1;
            }
            std::string label = rows[i].subject_id;
            if (spec.grouping == Grouping::PerSubjectDay)
                label += ":" + std::to_string(rows[i].day);
            dm.groups.push_back({i, i, dm.series.size() - 1, 0, std::move(label)});
        }
    }
    dm.series.back().end = rows.size();
    dm.groups.back().end = rows.size();
    dm.groups.back().last_series = dm.series.size();
    return dm;
}

}  // namespace longmix
