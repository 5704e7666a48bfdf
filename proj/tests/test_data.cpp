#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "contime/data.hpp"
#include "contime/metrics.hpp"

using namespace contime;

namespace {

struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& name, const std::string& body) : path(name) {
        std::ofstream out(path);
        out << body;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("csv loading") {
    TempCsv f("data_ok_test.csv",
              "date,a,b\n"
              "2020-01-01,1.5,2\n"
              "2020-01-02,-0.25,3e-1\n"
              "\n"
              "2020-01-03,4,5\n");
    const auto t = load_csv(f.path);
    CHECK(t.dates.size() == 3);
    CHECK(t.feature_names == std::vector<std::string>{"a", "b"});
    CHECK(t.values.rows == 3);
    CHECK(t.values.cols == 2);
    CHECK(t.values(1, 0) == -0.25);
    CHECK(t.values(1, 1) == 0.3);
    CHECK(t.values(2, 1) == 5.0);
}

TEST_CASE("csv error reporting names the offending cell") {
    TempCsv bad_cell("data_badcell_test.csv", "date,a\nx,1.0\ny,oops\n");
    try {
        load_csv(bad_cell.path);
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("'a'") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
    TempCsv ragged("data_ragged_test.csv", "date,a,b\nx,1,2\ny,3\n");
    CHECK_THROWS_AS(load_csv(ragged.path), IngestError);
    TempCsv empty("data_empty_test.csv", "");
    CHECK_THROWS_AS(load_csv(empty.path), IngestError);
    TempCsv header_only("data_header_test.csv", "date,a\n");
    CHECK_THROWS_AS(load_csv(header_only.path), IngestError);
    CHECK_THROWS_AS(load_csv("does_not_exist_test.csv"), IngestError);
}

TEST_CASE("split arithmetic") {
    SUBCASE("round figure") {
        const auto s = split_70_10_20(1000);
        CHECK(s.train_len() == 700);
        CHECK(s.val_len() == 100);
        CHECK(s.test_len() == 200);
        CHECK(s.val_begin == 700);
        CHECK(s.test_end == 1000);
    }
    SUBCASE("floor rule pushes the remainder into test") {
        const auto s = split_70_10_20(999);
        CHECK(s.train_len() == 699);
        CHECK(s.val_len() == 99);
        CHECK(s.test_len() == 201);
        CHECK(s.train_len() + s.val_len() + s.test_len() == 999);
    }
    SUBCASE("ranges are contiguous and ordered") {
        const auto s = split_70_10_20(57);
        CHECK(s.train_begin == 0);
        CHECK(s.train_end == s.val_begin);
        CHECK(s.val_end == s.test_begin);
        CHECK(s.test_end == 57);
    }
    CHECK_THROWS_AS(split_70_10_20(9), ConfigError);
}

TEST_CASE("standardization uses train statistics only and inverts exactly") {
    RawTable raw;
    raw.feature_names = {"a"};
    const int n = 100;
    std::vector<double> vals;
    for (int i = 0; i < n; ++i) vals.push_back(0.05 * i + std::sin(0.3 * i));
    raw.values = Tensor(n, 1, vals);
    raw.dates.resize(n);
    const auto d = make_dataset("t", raw);

    // train rows are zero-mean unit-variance under their own stats
    double m = 0.0;
    for (int i = 0; i < d.train.rows; ++i) m += d.train(i, 0);
    m /= d.train.rows;
    CHECK(m == doctest::Approx(0.0).epsilon(1e-12));
    double var = 0.0;
    for (int i = 0; i < d.train.rows; ++i) var += d.train(i, 0) * d.train(i, 0);
    var /= d.train.rows;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));

    // the test rows invert back to the raw values
    const Tensor back = d.norm.inverse(d.test);
    const auto s = split_70_10_20(n);
    for (int i = 0; i < back.rows; ++i)
        CHECK(back(i, 0) == doctest::Approx(raw.values(s.test_begin + i, 0)).epsilon(1e-12));

    RawTable flat = raw;
    for (int i = 0; i < n; ++i) flat.values(i, 0) = 1.0;
    CHECK_THROWS_AS(make_dataset("flat", flat), ConfigError);
}

TEST_CASE("window extraction") {
    Tensor split(20, 2);
    for (int i = 0; i < 20; ++i) {
        split(i, 0) = i;
        split(i, 1) = -i;
    }
    const auto ws = make_windows(split, 6, 3);
    CHECK(ws.size() == 20 - 6 - 3 + 1);
    const auto& w0 = ws[0];
    CHECK(w0.input.times.front() == 0.0);
    CHECK(w0.input.times.back() == 5.0);
    CHECK(w0.input.values(5, 0) == 5.0);
    CHECK(w0.last_obs[0] == 5.0);
    CHECK(w0.last_obs[1] == -5.0);
    CHECK(w0.target(0, 0) == 6.0);
    CHECK(w0.target(2, 1) == -8.0);
    const auto& w3 = ws[3];
    CHECK(w3.input.values(0, 0) == 3.0);
    CHECK(w3.target(0, 0) == 9.0);
    // all windows use the same local time grid
    CHECK(w3.input.times == w0.input.times);

    const auto strided = make_windows(split, 6, 3, 4);
    CHECK(strided.size() == 3);
    CHECK(strided[2].input.values(0, 0) == 8.0);

    CHECK_THROWS_AS(make_windows(split, 18, 3), ConfigError);
    CHECK_THROWS_AS(make_windows(split, 1, 3), ConfigError);
}

TEST_CASE("synthetic generator is seeded and degenerates to a sinusoid") {
    const auto a = synth_lagged_regime_series(600, 24, 5, 0.02);
    const auto b = synth_lagged_regime_series(600, 24, 5, 0.02);
    CHECK(a == b);
    const auto c = synth_lagged_regime_series(600, 24, 6, 0.02);
    CHECK(a != c);

    const auto pure = synth_lagged_regime_series(600, 24, 5, 0.0);
    const double two_pi = 2.0 * std::acos(-1.0);
    for (int t = 0; t < 600; ++t) CHECK(pure[t] == doctest::Approx(std::sin(two_pi * t / 24)).epsilon(1e-12));

    CHECK_THROWS_AS(synth_lagged_regime_series(100, 24, 5), ConfigError);
}

TEST_CASE("lag-one copying of the synthetic series scores a high tdi") {
    const auto s = synth_lagged_regime_series(1200, 24, 9, 0.02);
    // slice a horizon and compare a lag-one 'forecast' against the truth
    double tdi_acc = 0.0;
    int count = 0;
    for (int start = 100; start + 13 < 1200; start += 50) {
        std::vector<double> truth(s.begin() + start + 1, s.begin() + start + 13);
        std::vector<double> lagged(s.begin() + start, s.begin() + start + 12);
        tdi_acc += tdi(lagged, truth);
        ++count;
    }
    CHECK(tdi_acc / count > 0.005);
}

TEST_CASE("dataset wrapper standardizes the synthetic series") {
    const auto d = synth_lagged_regime(600, 24, 3, 0.02);
    CHECK(d.features() == 1);
    CHECK(d.train.rows == 420);
    CHECK(d.val.rows == 60);
    CHECK(d.test.rows == 120);
    CHECK(d.name == "synth_lagged_regime");
}
