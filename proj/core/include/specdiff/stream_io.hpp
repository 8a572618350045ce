#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "specdiff/correlator.hpp"
#include "specdiff/montecarlo.hpp"

namespace specdiff {

// Shortest decimal string that parses back to exactly the same double
// (tries %.15g, %.16g, %.17g in turn).  Keeps CSV output readable and
// byte-identical across runs.
std::string format_double(double x);

// Binary timestamp file, extension .phts:
//   magic "PHTS" | version u16 | channel u8 | tick_resolution_ps u32 |
//   count u64 | count little-endian u64 ticks, strictly ascending.
// Version is 1 and the tick resolution is fixed at 1 ps.
void write_phts(const std::filesystem::path& path, const PhotonStream& s);

// Reads a .phts file and validates magic, version, resolution and strict
// tick ordering.  The format carries no duration, so duration_ticks is set
// to duration_override (ticks) when nonzero, otherwise to last tick + 1.
PhotonStream read_phts(const std::filesystem::path& path,
                       std::uint64_t duration_override = 0);

// Text alternative: header line "# ticks_ps", then one integer tick per
// line.  Channel and duration are not stored; the reader takes both.
void write_ticks_csv(const std::filesystem::path& path, const PhotonStream& s);
PhotonStream read_ticks_csv(const std::filesystem::path& path,
                            Channel channel = Channel::A,
                            std::uint64_t duration_override = 0);

// Correlation curve as CSV.  "# key = value" comment lines carry the run
// metadata (and any caller-supplied pairs), then a column header
// tau_lo_s,tau_hi_s,g2,raw,err and one row per bin.
void write_g2_csv(const std::filesystem::path& path, const G2Curve& curve,
                  const std::vector<std::pair<std::string, std::string>>&
                      extra_header = {});

// Parses a curve written by write_g2_csv; recognized metadata keys are
// restored into G2Meta / norm_constant, unknown keys are ignored.
G2Curve read_g2_csv(const std::filesystem::path& path);

} // namespace specdiff
