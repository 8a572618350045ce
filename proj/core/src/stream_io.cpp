#include "specdiff/stream_io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "specdiff/version.hpp"

namespace specdiff {

namespace {

constexpr char kMagic[4] = {'P', 'H', 'T', 'S'};
constexpr std::uint16_t kVersion = 1;

void put_bytes(std::ofstream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void put_le(std::ofstream& out, T value) {
  std::array<unsigned char, sizeof(T)> buf;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  put_bytes(out, buf.data(), buf.size());
}

template <typename T>
T get_le(std::ifstream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> buf;
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (!in)
    throw validation_error("truncated timestamp file: " + path.string());
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(buf[i]) << (8 * i);
  return value;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::filesystem::path& path) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw validation_error("bad number '" + s + "' in " + path.string());
  return v;
}

std::uint64_t parse_u64(const std::string& s,
                        const std::filesystem::path& path) {
  char* end = nullptr;
  std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw validation_error("bad integer '" + s + "' in " + path.string());
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  return out;
}

std::uint64_t infer_duration(const std::vector<std::uint64_t>& ticks,
                             std::uint64_t duration_override) {
  if (duration_override != 0) return duration_override;
  return ticks.empty() ? 0 : ticks.back() + 1;
}

} // namespace

std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    double back = std::strtod(buf, nullptr);
    if (back == x || (std::isnan(back) && std::isnan(x))) break;
  }
  return buf;
}

void write_phts(const std::filesystem::path& path, const PhotonStream& s) {
  s.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw validation_error("cannot open for writing: " + path.string());
  put_bytes(out, kMagic, 4);
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint8_t>(out, s.channel == Channel::A ? 0 : 1);
  put_le<std::uint32_t>(out, tick_resolution_ps);
  put_le<std::uint64_t>(out, s.timestamps.size());
  for (std::uint64_t t : s.timestamps) put_le<std::uint64_t>(out, t);
  out.flush();
  if (!out) throw validation_error("write failed: " + path.string());
}

PhotonStream read_phts(const std::filesystem::path& path,
                       std::uint64_t duration_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw validation_error("not a PHTS file: " + path.string());
  auto version = get_le<std::uint16_t>(in, path);
  if (version != kVersion)
    throw validation_error("unsupported PHTS version in " + path.string());
  auto channel = get_le<std::uint8_t>(in, path);
  if (channel > 1)
    throw validation_error("bad channel byte in " + path.string());
  auto resolution = get_le<std::uint32_t>(in, path);
  if (resolution != tick_resolution_ps)
    throw validation_error("unsupported tick resolution in " + path.string());
  auto count = get_le<std::uint64_t>(in, path);

  PhotonStream s;
  s.channel = channel == 0 ? Channel::A : Channel::B;
  s.timestamps.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    s.timestamps[i] = get_le<std::uint64_t>(in, path);
    if (i > 0 && s.timestamps[i] <= s.timestamps[i - 1])
      throw validation_error("ticks not strictly ascending in " +
                             path.string());
  }
  s.duration_ticks = infer_duration(s.timestamps, duration_override);
  s.validate();
  return s;
}

void write_ticks_csv(const std::filesystem::path& path,
                     const PhotonStream& s) {
  s.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw validation_error("cannot open for writing: " + path.string());
  out << "# ticks_ps\n";
  for (std::uint64_t t : s.timestamps) out << t << '\n';
  out.flush();
  if (!out) throw validation_error("write failed: " + path.string());
}

PhotonStream read_ticks_csv(const std::filesystem::path& path,
                            Channel channel,
                            std::uint64_t duration_override) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open: " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "# ticks_ps")
    throw validation_error("missing '# ticks_ps' header in " + path.string());
  PhotonStream s;
  s.channel = channel;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::uint64_t t = parse_u64(line, path);
    if (!s.timestamps.empty() && t <= s.timestamps.back())
      throw validation_error("ticks not strictly ascending in " +
                             path.string());
    s.timestamps.push_back(t);
  }
  s.duration_ticks = infer_duration(s.timestamps, duration_override);
  s.validate();
  return s;
}

void write_g2_csv(const std::filesystem::path& path, const G2Curve& curve,
                  const std::vector<std::pair<std::string, std::string>>&
                      extra_header) {
  curve.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw validation_error("cannot open for writing: " + path.string());
  out << "# toolkit_version = " << version_string << '\n';
  out << "# duration_s = " << format_double(curve.meta.duration_s) << '\n';
  out << "# rate_a_per_s = " << format_double(curve.meta.rate_a) << '\n';
  out << "# rate_b_per_s = " << format_double(curve.meta.rate_b) << '\n';
  out << "# n_a = " << curve.meta.n_a << '\n';
  out << "# n_b = " << curve.meta.n_b << '\n';
  out << "# symmetrized = " << (curve.meta.symmetrized ? 1 : 0) << '\n';
  out << "# norm_constant = " << format_double(curve.norm_constant) << '\n';
  for (const auto& [key, value] : extra_header)
    out << "# " << key << " = " << value << '\n';
  out << "tau_lo_s,tau_hi_s,g2,raw,err\n";
  for (std::size_t k = 0; k < curve.g2.size(); ++k) {
    out << format_double(curve.bin_edges[k]) << ','
        << format_double(curve.bin_edges[k + 1]) << ','
        << format_double(curve.g2[k]) << ',' << curve.raw_counts[k] << ','
        << format_double(curve.stat_err[k]) << '\n';
  }
  out.flush();
  if (!out) throw validation_error("write failed: " + path.string());
}

G2Curve read_g2_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot open: " + path.string());
  G2Curve curve;
  std::string line;
  bool saw_columns = false;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto eq = t.find('=');
      if (eq == std::string::npos) continue;
      std::string key = trim(t.substr(1, eq - 1));
      std::string value = trim(t.substr(eq + 1));
      if (key == "duration_s")
        curve.meta.duration_s = parse_double(value, path);
      else if (key == "rate_a_per_s")
        curve.meta.rate_a = parse_double(value, path);
      else if (key == "rate_b_per_s")
        curve.meta.rate_b = parse_double(value, path);
      else if (key == "n_a")
        curve.meta.n_a = parse_u64(value, path);
      else if (key == "n_b")
        curve.meta.n_b = parse_u64(value, path);
      else if (key == "symmetrized")
        curve.meta.symmetrized = parse_u64(value, path) != 0;
      else if (key == "norm_constant")
        curve.norm_constant = parse_double(value, path);
      continue;
    }
    if (!saw_columns) {
      auto cols = split_csv(t);
      if (cols != std::vector<std::string>{"tau_lo_s", "tau_hi_s", "g2", "raw",
                                           "err"})
        throw validation_error("unexpected column header in " + path.string());
      saw_columns = true;
      continue;
    }
    auto cols = split_csv(t);
    if (cols.size() != 5)
      throw validation_error("expected 5 columns in " + path.string());
    double lo = parse_double(cols[0], path);
    double hi = parse_double(cols[1], path);
    if (curve.bin_edges.empty()) {
      curve.bin_edges.push_back(lo);
    } else if (lo != curve.bin_edges.back()) {
      throw validation_error("bins not contiguous in " + path.string());
    }
    curve.bin_edges.push_back(hi);
    curve.g2.push_back(parse_double(cols[2], path));
    curve.raw_counts.push_back(parse_u64(cols[3], path));
    curve.stat_err.push_back(parse_double(cols[4], path));
  }
  if (!saw_columns || curve.g2.empty())
    throw validation_error("no curve rows in " + path.string());
  curve.validate();
  return curve;
}

} // namespace specdiff
