#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "doctest.h"
#include "specdiff/correlator.hpp"
#include "specdiff/montecarlo.hpp"
#include "specdiff/philox.hpp"
#include "specdiff/stream_io.hpp"

using namespace specdiff;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("specdiff_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

PhotonStream sample_stream() {
  PhotonStream s;
  s.channel = Channel::B;
  s.duration_ticks = 5000000;
  PhiloxStream rng(21, 0);
  std::uint64_t t = 0;
  for (int i = 0; i < 2000; ++i) {
    t += 1 + rng.next_u64() % 2000;
    s.timestamps.push_back(t);
  }
  return s;
}

G2Curve sample_curve() {
  auto [a, b] = constant_rate_stream(5e3, 2.0, 77, 0.5);
  auto edges = make_log_bins({1e-6, 1e-2, 3});
  auto raw = correlate(a, b, edges);
  auto c = normalize(raw, edges, a, b, {});
  c.norm_constant = 1.0137;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

} // namespace

TEST_CASE("format_double round-trips doubles compactly") {
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1e-9) == "1e-09");

  PhiloxStream rng(3, 0);
  for (int i = 0; i < 2000; ++i) {
    double x = (rng.next_double() - 0.5) *
               std::pow(10.0, static_cast<double>(rng.next_u64() % 40) - 20.0);
    std::string s = format_double(x);
    CHECK(std::stod(s) == x);
  }
}

TEST_CASE("phts: write/read round trip") {
  TempDir tmp;
  auto file = tmp.path / "a.phts";
  auto s = sample_stream();
  write_phts(file, s);

  auto r = read_phts(file, s.duration_ticks);
  CHECK(r.timestamps == s.timestamps);
  CHECK(r.channel == Channel::B);
  CHECK(r.duration_ticks == s.duration_ticks);

  // without an override the duration is inferred from the last tick
  auto r2 = read_phts(file);
  CHECK(r2.duration_ticks == s.timestamps.back() + 1);

  // empty streams are representable
  PhotonStream empty;
  empty.channel = Channel::A;
  empty.duration_ticks = 10;
  write_phts(tmp.path / "e.phts", empty);
  auto re = read_phts(tmp.path / "e.phts", 10);
  CHECK(re.timestamps.empty());
  CHECK(re.duration_ticks == 10);
}

TEST_CASE("phts: corruption is rejected") {
  TempDir tmp;
  auto file = tmp.path / "a.phts";
  write_phts(file, sample_stream());
  std::string good = slurp(file);

  auto bad_magic = good;
  bad_magic[0] = 'Q';
  spit(file, bad_magic);
  CHECK_THROWS_AS(read_phts(file), validation_error);

  auto bad_version = good;
  bad_version[4] = 9;
  spit(file, bad_version);
  CHECK_THROWS_AS(read_phts(file), validation_error);

  auto truncated = good.substr(0, good.size() - 3);
  spit(file, truncated);
  CHECK_THROWS_AS(read_phts(file), validation_error);

  // swap two timestamp u64s to break the ordering
  auto disordered = good;
  std::size_t body = good.size() - 2000 * 8;
  for (int i = 0; i < 8; ++i)
    std::swap(disordered[body + i], disordered[body + 8 + i]);
  spit(file, disordered);
  CHECK_THROWS_AS(read_phts(file), validation_error);

  CHECK_THROWS_AS(read_phts(tmp.path / "missing.phts"), validation_error);
}

TEST_CASE("ticks csv: round trip with caller-supplied channel and duration") {
  TempDir tmp;
  auto file = tmp.path / "t.csv";
  auto s = sample_stream();
  write_ticks_csv(file, s);

  auto r = read_ticks_csv(file, Channel::B, s.duration_ticks);
  CHECK(r.timestamps == s.timestamps);
  CHECK(r.channel == Channel::B);
  CHECK(r.duration_ticks == s.duration_ticks);

  spit(file, "# ticks_ps\n5\n4\n");
  CHECK_THROWS_AS(read_ticks_csv(file), validation_error);
  spit(file, "# ticks_ps\n5\nabc\n");
  CHECK_THROWS_AS(read_ticks_csv(file), validation_error);
}

TEST_CASE("g2 csv: round trip restores bins, values and metadata") {
  TempDir tmp;
  auto file = tmp.path / "g2.csv";
  auto c = sample_curve();
  write_g2_csv(file, c, {{"note", "control run"}});

  auto r = read_g2_csv(file);
  r.validate();
  REQUIRE(r.g2.size() == c.g2.size());
  // format_double guarantees exact value round trips
  CHECK(r.bin_edges == c.bin_edges);
  CHECK(r.g2 == c.g2);
  CHECK(r.raw_counts == c.raw_counts);
  CHECK(r.stat_err == c.stat_err);
  CHECK(r.norm_constant == c.norm_constant);
  CHECK(r.meta.duration_s == c.meta.duration_s);
  CHECK(r.meta.rate_a == c.meta.rate_a);
  CHECK(r.meta.rate_b == c.meta.rate_b);
  CHECK(r.meta.n_a == c.meta.n_a);
  CHECK(r.meta.n_b == c.meta.n_b);
  CHECK(r.meta.symmetrized == c.meta.symmetrized);

  // writing the reread curve reproduces the file byte for byte
  auto file2 = tmp.path / "g2b.csv";
  write_g2_csv(file2, r, {{"note", "control run"}});
  CHECK(slurp(file2) == slurp(file));
}

TEST_CASE("g2 csv: malformed input is rejected") {
  TempDir tmp;
  auto file = tmp.path / "g2.csv";

  spit(file, "tau_lo_s,tau_hi_s,g2\n1e-9,1e-8,1.0\n");
  CHECK_THROWS_AS(read_g2_csv(file), validation_error); // wrong columns

  spit(file,
       "tau_lo_s,tau_hi_s,g2,raw,err\n"
       "1e-9,1e-8,1.0,10,0.1\n"
       "2e-8,1e-7,1.0,10,0.1\n"); // gap between bins
  CHECK_THROWS_AS(read_g2_csv(file), validation_error);

  spit(file,
       "tau_lo_s,tau_hi_s,g2,raw,err\n"
       "1e-9,1e-8,1.0,ten,0.1\n");
  CHECK_THROWS_AS(read_g2_csv(file), validation_error);

  spit(file, "tau_lo_s,tau_hi_s,g2,raw,err\n");
  CHECK_THROWS_AS(read_g2_csv(file), validation_error); // no bins
}
