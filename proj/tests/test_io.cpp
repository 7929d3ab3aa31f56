#include <doctest.h>

#include <filesystem>

#include "tddm/io.hpp"
#include "tddm/report.hpp"

using namespace tddm;

TEST_CASE("csv round trip with quoting") {
  io::CsvTable t{{"a", "b,c"}, {{"1", "x\"y"}, {"line\nbreak", ""}}};
  const std::string text = io::to_csv(t);
  CHECK(text.find("\"b,c\"") != std::string::npos);
  CHECK(text.find("\"x\"\"y\"") != std::string::npos);
  const io::CsvTable back = io::parse_csv(text);
  CHECK(back.header == t.header);
  CHECK(back.rows == t.rows);
  CHECK(back.column("b,c") == 1);
  CHECK_THROWS(back.column("zzz"));
}

TEST_CASE("ragged csv names the line") {
  try {
    io::parse_csv("a,b\n1,2\n3\n");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::data);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("pgm round trip") {
  Plane p(9, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 9; ++x) p.at(x, y) = ((x * 7 + y * 3) % 256) / 255.0;
  }
  const std::string bytes = io::encode_pgm(p);
  CHECK(bytes.rfind("P5\n9 8\n255\n", 0) == 0);
  const Plane back = io::decode_pgm(bytes);
  CHECK(back.width() == 9);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 9; ++x) CHECK(back.at(x, y) == doctest::Approx(p.at(x, y)));
  }
  CHECK_THROWS(io::decode_pgm("P2\n1 1\n255\n0"));
}

TEST_CASE("hconcat inserts white separators") {
  const Plane joined = io::hconcat({Plane(8, 8, 0.0), Plane(8, 8, 0.0)});
  CHECK(joined.width() == 17);
  CHECK(joined.at(8, 3) == 1.0);
}

TEST_CASE("atomic write creates directories and leaves no temp file") {
  const auto dir = std::filesystem::temp_directory_path() / "tddm_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  const std::string path = (dir / "f.txt").string();
  io::write_file_atomic(path, "hello");
  CHECK(io::read_file(path) == "hello");
  io::write_file_atomic(path, "again");
  CHECK(io::read_file(path) == "again");
  int entries = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
  CHECK_THROWS_AS(io::read_file((dir / "missing").string()), IoError);
}

namespace {

metrics::BenchmarkRecord sample_record() {
  metrics::BenchmarkRecord r;
  r.bins = 32;
  metrics::Columns a, b;
  a.average_return = 0.5;
  a.return_std = 0.1;
  b.average_return = 1.0;
  b.return_std = 0.3;
  r.trials = {a, b};
  r.aggregate = metrics::Columns::from_values([&] {
    std::array<double, 10> m{};
    for (std::size_t k = 0; k < 10; ++k) m[k] = (a.values()[k] + b.values()[k]) / 2.0;
    return m;
  }());
  return r;
}

}  // namespace

TEST_CASE("benchmark table round trip and consistency check") {
  const metrics::BenchmarkRecord r = sample_record();
  const io::CsvTable t = report::benchmark_table(r, {11, 23});
  CHECK(t.header.front() == "trial");
  CHECK(t.rows.back()[0] == "mean");
  CHECK(report::read_benchmark(io::parse_csv(io::to_csv(t))) == r);
  CHECK_NOTHROW(report::describe(t));

  io::CsvTable tampered = t;
  tampered.rows.back()[2] = "0.9";
  CHECK_THROWS(report::describe(tampered));
}

TEST_CASE("comparison table marks winners and counts them") {
  metrics::Columns tddm, bench;
  tddm.average_return = 0.8;
  bench.average_return = 0.6;
  tddm.return_std = 0.5;
  bench.return_std = 0.2;
  const io::CsvTable t = report::comparison_table({{"catch", tddm, bench}});
  CHECK(t.header[0] == "environment");
  CHECK(t.header[2] == "A.R.");
  CHECK(t.rows[0][1] == "TDDM");
  CHECK(t.rows[2][1] == "best");
  CHECK(t.rows[2][2] == "TDDM");
  CHECK(t.rows[2][9] == "Benchmark");  // ST.D.R: lower wins
  CHECK(t.rows[2][3] == "tie");
  CHECK(t.rows[3][1] == "#TDDM");
  CHECK(t.rows[3][2] == "1");
  CHECK(t.rows[4][9] == "1");
  CHECK_FALSE(report::higher_is_better(7));
  CHECK_NOTHROW(report::describe(t));
}

TEST_CASE("describe rejects unknown tables") {
  CHECK_THROWS(report::describe(io::CsvTable{{"x", "y"}, {}}));
}
