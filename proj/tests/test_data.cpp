#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "vrnnaug/data.hpp"
#include "vrnnaug/rng.hpp"

using namespace vrnnaug;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

fs::path write_temp(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "vrnnaug_data_test";
  fs::create_directories(dir);
  const fs::path path = dir / name;
  std::ofstream os(path, std::ios::trunc);
  os << text;
  return path;
}

TimeSeries counting_series(int64_t n) {
  TimeSeries s;
  s.length = n;
  s.d_u = 1;
  s.d_y = 1;
  for (int64_t t = 0; t < n; ++t) {
    s.u.push_back(static_cast<double>(t));
    s.y.push_back(static_cast<double>(t) + 0.5);
  }
  return s;
}

}  // namespace

TEST_CASE("load_csv") {
  SUBCASE("three rows, one input and one output column") {
    auto path = write_temp("basic.csv", "u,y\n1,2\n3,4\n5,6\n");
    TimeSeries s = load_csv(path, {"u"}, {"y"});
    CHECK(s.length == 3);
    CHECK(s.d_u == 1);
    CHECK(s.d_y == 1);
    CHECK(s.u_at(2, 0) == 5.0);
    CHECK(s.y_at(1, 0) == 4.0);
  }
  SUBCASE("blank cell names the position") {
    auto path = write_temp("blank.csv", "u,y\n1,2\n3,\n");
    CHECK_THROWS_WITH_AS(load_csv(path, {"u"}, {"y"}),
                         doctest::Contains("row 1"), DataError);
  }
  SUBCASE("non-numeric cell names the cell") {
    auto path = write_temp("nan.csv", "u,y\n1,2\nx,4\n");
    CHECK_THROWS_WITH_AS(load_csv(path, {"u"}, {"y"}),
                         doctest::Contains("'x'"), DataError);
  }
  SUBCASE("two output columns give d_y = 2") {
    auto path = write_temp("tank.csv", "u,y1,y2\n0,1,2\n1,3,4\n");
    TimeSeries s = load_csv(path, {"u"}, {"y1", "y2"});
    CHECK(s.d_y == 2);
    CHECK(s.y_at(1, 1) == 4.0);
  }
  SUBCASE("missing column") {
    auto path = write_temp("cols.csv", "a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(load_csv(path, {"u"}, {"b"}),
                         doctest::Contains("'u'"), DataError);
  }
  SUBCASE("empty file") {
    auto path = write_temp("empty.csv", "");
    CHECK_THROWS_AS(load_csv(path, {"u"}, {"y"}), DataError);
  }
  SUBCASE("header only") {
    auto path = write_temp("headeronly.csv", "u,y\n");
    CHECK_THROWS_AS(load_csv(path, {"u"}, {"y"}), DataError);
  }
}

TEST_CASE("csv round trip") {
  TimeSeries s;
  s.length = 3;
  s.d_u = 1;
  s.d_y = 2;
  s.u = {0.1, -2.25, 1e-17};
  s.y = {1, 2, 3, 4, 5.5, -6.125};
  auto path = write_temp("roundtrip.csv", "");
  write_csv(path, s, {"u"}, {"y1", "y2"});
  TimeSeries r = load_csv(path, {"u"}, {"y1", "y2"});
  REQUIRE(r.length == 3);
  for (size_t i = 0; i < s.u.size(); ++i) CHECK(r.u[i] == s.u[i]);
  for (size_t i = 0; i < s.y.size(); ++i) CHECK(r.y[i] == s.y[i]);
}

TEST_CASE("chrono_split") {
  SUBCASE("50/20/30 on 1000 rows") {
    SplitSeries sp = chrono_split(counting_series(1000), {0.5, 0.2, 0.3});
    CHECK(sp.train.length == 500);
    CHECK(sp.valid.length == 200);
    CHECK(sp.test.length == 300);
  }
  SUBCASE("80/10/10 on 10 rows") {
    SplitSeries sp = chrono_split(counting_series(10), {0.8, 0.1, 0.1});
    CHECK(sp.train.length == 8);
    CHECK(sp.valid.length == 1);
    CHECK(sp.test.length == 1);
  }
  SUBCASE("concatenation reproduces the series") {
    TimeSeries s = counting_series(97);
    SplitSeries sp = chrono_split(s, {0.5, 0.2, 0.3});
    std::vector<double> joined = sp.train.u;
    joined.insert(joined.end(), sp.valid.u.begin(), sp.valid.u.end());
    joined.insert(joined.end(), sp.test.u.begin(), sp.test.u.end());
    REQUIRE(joined.size() == s.u.size());
    for (size_t i = 0; i < joined.size(); ++i) CHECK(joined[i] == s.u[i]);
  }
  SUBCASE("fraction validation") {
    CHECK_THROWS_AS(chrono_split(counting_series(100), {0.5, 0.2, 0.2}),
                    ArgumentError);
    CHECK_THROWS_AS(chrono_split(counting_series(100), {-0.1, 0.6, 0.5}),
                    ArgumentError);
  }
  SUBCASE("segments shorter than the window are rejected") {
    CHECK_THROWS_AS(chrono_split(counting_series(100), {0.5, 0.2, 0.3}, 64),
                    DataError);
  }
}

TEST_CASE("standardizer") {
  TimeSeries train;
  train.length = 2;
  train.d_u = 1;
  train.d_y = 1;
  train.u = {0.0, 2.0};
  train.y = {10.0, 30.0};

  SUBCASE("population convention on [0, 2]") {
    Standardizer st = Standardizer::fit(train);
    CHECK(st.u_mean()[0] == doctest::Approx(1.0));
    CHECK(st.u_std()[0] == doctest::Approx(1.0));  // sqrt(((0-1)^2+(2-1)^2)/2)
    TimeSeries out = st.apply(train);
    CHECK(out.u[0] == doctest::Approx(-1.0));
    CHECK(out.u[1] == doctest::Approx(1.0));
  }
  SUBCASE("apply then invert is the identity") {
    RngStream rng(21);
    TimeSeries s;
    s.length = 50;
    s.d_u = 2;
    s.d_y = 1;
    s.u.resize(100);
    s.y.resize(50);
    rng.fill_uniform(s.u, -5.0, 5.0);
    rng.fill_uniform(s.y, 100.0, 200.0);
    Standardizer st = Standardizer::fit(s);
    TimeSeries round = st.invert(st.apply(s));
    for (size_t i = 0; i < s.u.size(); ++i) {
      CHECK(round.u[i] == doctest::Approx(s.u[i]).epsilon(1e-12));
    }
    for (size_t i = 0; i < s.y.size(); ++i) {
      CHECK(round.y[i] == doctest::Approx(s.y[i]).epsilon(1e-12));
    }
  }
  SUBCASE("constant column is rejected") {
    TimeSeries flat = train;
    flat.y = {5.0, 5.0};
    CHECK_THROWS_AS(Standardizer::fit(flat), DataError);
  }
  SUBCASE("statistics come from the fitted series only") {
    Standardizer st = Standardizer::fit(train);
    TimeSeries other = train;
    other.u = {100.0, 200.0};
    TimeSeries out = st.apply(other);  // uses train's moments
    CHECK(out.u[0] == doctest::Approx(99.0));
  }
}

TEST_CASE("shingle") {
  SUBCASE("1024 rows with window 64 give 961 chunks") {
    CHECK(shingle(counting_series(1024), 64).count() == 961);
  }
  SUBCASE("count law holds over randomized sizes") {
    RngStream rng(33);
    for (int rep = 0; rep < 20; ++rep) {
      const int64_t t = 2 + static_cast<int64_t>(rng.uniform(0.0, 400.0));
      const int w = 1 + static_cast<int>(rng.uniform(0.0, double(t)));
      CHECK(shingle(counting_series(t), w).count() == t - w + 1);
    }
  }
  SUBCASE("window equal to length gives one whole-series chunk") {
    ChunkSet set = shingle(counting_series(64), 64);
    CHECK(set.count() == 1);
    CHECK(set.view(0).start == 0);
    CHECK(set.view(0).window == 64);
  }
  SUBCASE("stride-one window enumeration") {
    ChunkSet set = shingle(counting_series(5), 2);
    REQUIRE(set.count() == 4);
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(set.view(j).start == j);
      // Chunk j, row i holds series row j + i.
      CHECK(set.series->u_at(set.view(j).start + 1, 0) == double(j + 1));
    }
  }
  SUBCASE("window larger than the series") {
    CHECK_THROWS_AS(shingle(counting_series(5), 6), DataError);
  }
  SUBCASE("prefix reconstruction from chunk first rows") {
    TimeSeries s = counting_series(20);
    ChunkSet set = shingle(s, 4);
    for (int64_t j = 0; j < set.count(); ++j) {
      CHECK(set.series->u_at(set.view(j).start, 0) == s.u[static_cast<size_t>(j)]);
    }
  }
}

TEST_CASE("simulate_linear_gaussian") {
  SUBCASE("no noise and zero input stay at zero") {
    LinearGaussianOptions opt;
    opt.process_noise_std = 0.0;
    opt.measurement_noise_std = 0.0;
    opt.excitation_lo = 0.0;
    opt.excitation_hi = 0.0;
    TimeSeries s = simulate_linear_gaussian(50, InputMode::kExcitation, 3, opt);
    for (double v : s.y) CHECK(v == 0.0);
  }
  SUBCASE("deterministic recursion from h0 = (1, 0)") {
    LinearGaussianOptions opt;
    opt.process_noise_std = 0.0;
    opt.measurement_noise_std = 0.0;
    opt.excitation_lo = 0.0;
    opt.excitation_hi = 0.0;
    opt.h0 = {1.0, 0.0};
    TimeSeries s = simulate_linear_gaussian(3, InputMode::kExcitation, 3, opt);
    CHECK(s.y[0] == doctest::Approx(1.0));
    CHECK(s.y[1] == doctest::Approx(0.7));   // h1 = A (1,0) = (0.7, 0)
    CHECK(s.y[2] == doctest::Approx(0.49));  // h2 = A (0.7,0)
  }
  SUBCASE("measurement noise has unit sample variance") {
    LinearGaussianOptions opt;
    opt.process_noise_std = 0.0;
    opt.excitation_lo = 0.0;
    opt.excitation_hi = 0.0;
    const int64_t n = 10000;
    TimeSeries s = simulate_linear_gaussian(n, InputMode::kExcitation, 5, opt);
    // With frozen dynamics y_t is exactly the measurement-noise stream.
    double mean = 0.0, var = 0.0;
    for (double v : s.y) mean += v;
    mean /= static_cast<double>(n);
    for (double v : s.y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("same seed reproduces the series, different seeds do not") {
    TimeSeries a = simulate_linear_gaussian(100, InputMode::kExcitation, 9);
    TimeSeries b = simulate_linear_gaussian(100, InputMode::kExcitation, 9);
    TimeSeries c = simulate_linear_gaussian(100, InputMode::kExcitation, 10);
    bool same = true, differs = false;
    for (size_t i = 0; i < a.y.size(); ++i) {
      same = same && a.y[i] == b.y[i];
      differs = differs || a.y[i] != c.y[i];
    }
    CHECK(same);
    CHECK(differs);
  }
  SUBCASE("excitation inputs stay inside the stated range") {
    TimeSeries s = simulate_linear_gaussian(500, InputMode::kExcitation, 7);
    for (double u : s.u) {
      CHECK(u >= -2.5);
      CHECK(u < 2.5);
    }
  }
  SUBCASE("sinusoid input is the stated two-tone signal") {
    TimeSeries s = simulate_linear_gaussian(30, InputMode::kSinusoid, 7);
    for (int64_t t = 0; t < 30; ++t) {
      const double expect = std::sin(2.0 * kPi * double(t) / 10.0) +
                            std::sin(2.0 * kPi * double(t) / 25.0);
      CHECK(s.u[static_cast<size_t>(t)] == doctest::Approx(expect));
    }
  }
  SUBCASE("length must be positive") {
    CHECK_THROWS_AS(simulate_linear_gaussian(0, InputMode::kSinusoid, 1),
                    ArgumentError);
  }
}

TEST_CASE("load_motorcycle") {
  SUBCASE("canonical file has 133 points with repeated time stamps") {
    const fs::path path = fs::path(VRNNAUG_DATA_DIR) / "motorcycle.csv";
    REQUIRE(fs::exists(path));
    TimeSeries s = load_motorcycle(path);
    CHECK(s.length == 133);
    CHECK(s.d_u == 1);
    CHECK(s.d_y == 1);
    // Several acceleration readings share a time stamp.
    bool repeated = false;
    for (int64_t t = 1; t < s.length; ++t) {
      repeated = repeated || s.u_at(t, 0) == s.u_at(t - 1, 0);
    }
    CHECK(repeated);
  }
  SUBCASE("empty file is an error") {
    auto path = write_temp("moto_empty.csv", "");
    CHECK_THROWS_AS(load_motorcycle(path), DataError);
  }
  SUBCASE("wrong column count is an error") {
    auto path = write_temp("moto_cols.csv", "a,b,c\n1,2,3\n");
    CHECK_THROWS_AS(load_motorcycle(path), DataError);
  }
}
