#include "longmix/dataset.hpp"
#include "longmix/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

using namespace longmix;

namespace {

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error thrown");
    return Errc::IoError;
}

std::string to_csv(const LongDataset& d) {
    std::ostringstream out;
    write_long_csv(out, d);
    return out.str();
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("minimal csv parses") {
    const auto d = parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\n"
                                  "s1,1,1,1,0,4.1\n"
                                  "s1,1,0,0,0,4.2\n");
    REQUIRE(d.size() == 2);
    CHECK(d.rows[0].time_point == 0);
    CHECK(d.rows[1].response == doctest::Approx(4.1));
    CHECK(d.subjects == std::vector<std::string>{"s1"});
}

TEST_CASE("columns in any order, quotes, bom, boolean spellings") {
    const auto d = parse_long_csv("\xEF\xBB\xBF" "fev1,smoker,\"subject_id\",time_point,day,hour_actual\r\n"
                                  "3.5,true,\"a\",0,2,0\r\n"
                                  "3.4,TRUE,a,1,2,1\r\n");
    REQUIRE(d.size() == 2);
    CHECK(d.rows[0].smoker);
    CHECK(d.rows[0].day == 2);
}

TEST_CASE("duplicate triple") {
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\n"
                             "s1,1,0,0,0,4.2\ns1,1,0,0,0,4.3\n");
          }) == Errc::DuplicateTriple);
}

TEST_CASE("missing column, smoker change, bad values") {
    CHECK(code_of([] { parse_long_csv("subject_id,day,time_point,smoker,fev1\ns1,1,0,0,4\n"); }) ==
          Errc::MissingColumn);
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\n"
                             "s1,1,0,0,0,4.2\ns1,2,0,0,1,4.3\n");
          }) == Errc::NonConstantSmoker);
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\ns1,1,0,0,0,abc\n");
          }) == Errc::UnparseableValue);
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\ns1,4,0,0,0,4\n");
          }) == Errc::InvalidValue);
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\ns1,1,7,0,0,4\n");
          }) == Errc::InvalidValue);
    CHECK(code_of([] {
              parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\ns1,1,0,0,maybe,4\n");
          }) == Errc::UnparseableValue);
}

TEST_CASE("error message names line and column") {
    try {
        parse_long_csv("subject_id,day,time_point,hour_actual,smoker,fev1\ns1,1,0,0,0,4\ns1,1,1,1,0,x\n");
        FAIL("expected error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("fev1") != std::string::npos);
    }
}

TEST_CASE("full layout row count") {
    const auto d = testing::grid(28, {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6}, [](int, int, int) { return 4.0; });
    CHECK(d.size() == 588);
    CHECK(d.subjects.size() == 28);
    CHECK(d.subjects[1] == "2");
    CHECK(d.subjects[9] == "10");
}

TEST_CASE("row permutation gives identical normalized data") {
    const auto d = testing::grid(5, {1, 2}, {0, 1, 2}, [](int s, int d, int t) { return s + 0.1 * d + 0.01 * t; });
    auto rows = d.rows;
    std::mt19937 gen(3);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(rows.begin(), rows.end(), gen);
        CHECK(to_csv(make_dataset(rows)) == to_csv(d));
    }
}

TEST_CASE("csv round trip is exact") {
    const auto d = testing::grid(3, {1, 3}, {0, 2, 6}, [](int s, int, int t) { return 4.0 + s / 3.0 - t / 7.0; });
    const auto back = parse_long_csv(to_csv(d));
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(back.rows[i].response == d.rows[i].response);
}

TEST_CASE("filter and subset") {
    const auto d = testing::grid(4, {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6}, [](int, int, int) { return 1.0; });
    const std::vector<int> keep{0, 2, 4, 6};
    const auto f = filter_time_points(d, keep);
    CHECK(f.size() == 4 * 3 * 4);
    CHECK(f.time_points == keep);
    CHECK(subset_by_smoker(d, true).subjects.size() == 2);
}

TEST_CASE("full spec column order") {
    const auto d = testing::grid(4, {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6}, [](int, int, int) { return 1.0; });
    const auto dm = encode_design(d, ModelSpec{});
    CHECK(dm.p() == 7);
    CHECK(dm.column_names ==
          std::vector<std::string>{"intercept", "smoker", "day2", "day3", "hour", "day2:hour", "day3:hour"});
    ModelSpec quad;
    quad.poly_degree = 2;
    CHECK(encode_design(d, quad).column_names.back() == "hour^2");
}

TEST_CASE("reduced spec has four columns") {
    const auto d = testing::grid(4, {1, 2, 3}, {0, 1, 2}, [](int, int, int) { return 1.0; });
    const auto dm = encode_design(d, with_fixed_terms(ModelSpec{}, "day+hour"));
    CHECK(dm.p() == 4);
}

TEST_CASE("dummy coding of one row") {
    const auto d = testing::grid(4, {1, 2, 3}, {0, 1, 2, 3, 4, 5, 6}, [](int, int, int) { return 1.0; });
    const auto dm = encode_design(d, ModelSpec{});
    bool found = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto& o = d.rows[i];
        if (o.day == 3 && o.time_point == 4 && o.smoker) {
            Eigen::VectorXd expect(7);
            expect << 1, 1, 0, 1, 4, 0, 4;
            CHECK(dm.X.row(static_cast<Eigen::Index>(i)).transpose() == expect);
            found = true;
        }
        const auto r = dm.X.row(static_cast<Eigen::Index>(i));
        CHECK(r(2) + r(3) <= 1.0);
        CHECK(r(5) == r(2) * r(4));
        CHECK(r(6) == r(3) * r(4));
    }
    CHECK(found);
}

TEST_CASE("encoding is deterministic") {
    const auto d = testing::grid(6, {1, 2, 3}, {0, 1, 2, 3}, [](int s, int, int t) { return s * 0.3 + t; });
    const auto a = encode_design(d, ModelSpec{});
    const auto b = encode_design(d, ModelSpec{});
    CHECK(a.X == b.X);
    CHECK(a.column_names == b.column_names);
}

TEST_CASE("series and groups partition rows") {
    const auto d = testing::grid(3, {1, 2}, {0, 1, 2}, [](int, int, int) { return 1.0; });
    ModelSpec spec;
    auto dm = encode_design(d, spec);
    CHECK(dm.series.size() == 6);
    CHECK(dm.groups.size() == 3);
    CHECK(dm.groups[0].size() == 6);
    spec.grouping = Grouping::PerSubjectDay;
    dm = encode_design(d, spec);
    CHECK(dm.groups.size() == 6);
    std::size_t covered = 0;
    for (const auto& g : dm.groups) covered += g.size();
    CHECK(covered == d.size());
}

TEST_CASE("single-level factor") {
    const auto d = testing::grid(4, {1}, {0, 1, 2}, [](int, int, int) { return 1.0; });
    CHECK(code_of([&] { encode_design(d, ModelSpec{}); }) == Errc::SingleLevelFactor);
    CHECK_NOTHROW(encode_design(d, with_fixed_terms(ModelSpec{}, "hour+smoker")));
}

TEST_CASE("formula parsing") {
    const auto s = with_fixed_terms(ModelSpec{}, "day*hour+smoker");
    CHECK(fixed_formula(s) == "day*hour+smoker");
    CHECK(fixed_formula(with_fixed_terms(ModelSpec{}, "1")) == "1");
    CHECK(code_of([] { with_fixed_terms(ModelSpec{}, "day+age"); }) == Errc::InvalidSpec);
    CHECK(code_of([] { with_fixed_terms(ModelSpec{}, "day:hour").validate(); }) == Errc::InvalidSpec);
    CHECK(parse_corr_family("cs") == CorrFamily::CompoundSymmetric);
    CHECK(parse_grouping("subject-day") == Grouping::PerSubjectDay);
}

}
