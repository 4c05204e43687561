#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longmix {

/// One spirometry measurement: a subject on a treatment day at a time point.
struct Observation {
    std::string subject_id;
    int day = 1;            // treatment day, 1..3
    int time_point = 0;     // measurement index, 0..6
    double hour_actual = 0; // hours since the day's baseline; informational
    bool smoker = false;
    double response = 0;    // liters
};

/// Validated long-format data, rows ordered by (subject, day, time_point).
struct LongDataset {
    std::vector<Observation> rows;
    std::vector<std::string> subjects;  // ordered unique ids
    std::vector<int> days;              // observed day levels, ascending
    std::vector<int> time_points;       // observed time-point grid, ascending
    std::string response_name = "fev1";

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }
};

/// Subject ordering: purely numeric ids compare numerically, otherwise lexicographic.
bool subject_less(std::string_view a, std::string_view b);

/// Validates and normalizes raw rows. Throws longmix::Error on any invariant violation.
LongDataset make_dataset(std::vector<Observation> rows, std::string response_name = "fev1");

LongDataset parse_long_csv(std::istream& in);
LongDataset parse_long_csv(std::string_view text);
LongDataset read_long_csv(const std::string& path);

void write_long_csv(std::ostream& out, const LongDataset& data);

/// Keeps only the listed time points (the grid shrinks accordingly).
LongDataset filter_time_points(const LongDataset& data, std::span<const int> keep);

/// Rows of subjects whose smoker flag equals `smoker`.
LongDataset subset_by_smoker(const LongDataset& data, bool smoker);

enum class Grouping { PerSubject, PerSubjectDay };
enum class CorrFamily { AR1, CompoundSymmetric, Independent };
enum class Method { REML, ML };

std::string_view to_string(Grouping g) noexcept;
std::string_view to_string(CorrFamily f) noexcept;
std::string_view to_string(Method m) noexcept;
Grouping parse_grouping(std::string_view text);
CorrFamily parse_corr_family(std::string_view text);
Method parse_method(std::string_view text);

/// Fixed-effect terms plus the variance structure of the mixed model.
/// Defaults reproduce the full model: day*hour + smoker, per-subject
/// random intercept, AR1 residuals, REML.
struct ModelSpec {
    bool smoker = true;
    bool day = true;
    bool hour = true;
    bool day_hour = true;
    int poly_degree = 1;  // 2 adds hour^2
    Grouping grouping = Grouping::PerSubject;
    CorrFamily corr = CorrFamily::AR1;
    Method method = Method::REML;

    void validate() const;
    bool same_fixed_effects(const ModelSpec& other) const noexcept;
};

/// Parses formulas like "day*hour+smoker", "day+hour+day:hour", "1" into `base`.
ModelSpec with_fixed_terms(ModelSpec base, std::string_view formula);

/// Canonical formula for the spec's fixed terms, e.g. "day*hour+smoker".
std::string fixed_formula(const ModelSpec& spec);

/// A within-(subject, day) ordered run of rows [begin, end).
struct Series {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t subject = 0;  // index into LongDataset::subjects
    int day = 0;

    std::size_t size() const noexcept { return end - begin; }
};

/// Rows sharing one random intercept; a contiguous run of whole series.
struct Group {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t first_series = 0;
    std::size_t last_series = 0;  // one past
    std::string label;

    std::size_t size() const noexcept { return end - begin; }
};

struct DesignMatrices {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> column_names;
    std::vector<Series> series;
    std::vector<Group> groups;
    std::vector<int> occasion;   // per row: rank of its time point in the dataset grid
    std::vector<double> hours;   // per row: hour_actual

    std::size_t n() const noexcept { return static_cast<std::size_t>(X.rows()); }
    std::size_t p() const noexcept { return static_cast<std::size_t>(X.cols()); }
};

/// Column order: intercept, smoker, day levels, hour, day:hour, hour^2.
DesignMatrices encode_design(const LongDataset& data, const ModelSpec& spec);

}  // namespace longmix
