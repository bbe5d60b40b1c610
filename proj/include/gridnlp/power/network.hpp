#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "gridnlp/common.hpp"

namespace gridnlp::power {

// All electrical quantities are per-unit on the network's MVA base; angles
// are radians.  Element cross-references are indices into the owning
// NetworkData vectors, not original bus numbers.

struct Bus {
  int id = 0;  // original bus number, kept for reporting
  double v_min = 0.0;
  double v_max = 0.0;
  bool reference = false;
};

struct Line {
  index_t from = -1;
  index_t to = -1;
  double g = 0.0;      // series conductance  r / (r^2 + x^2)
  double b = 0.0;      // series susceptance -x / (r^2 + x^2)
  double s_max = kInf;  // apparent-power rating; kInf when unlimited
  double angle_min = 0.0;  // bounds on theta_from - theta_to
  double angle_max = 0.0;
};

struct Generator {
  index_t bus = -1;
  double p_min = 0.0, p_max = 0.0;
  double q_min = 0.0, q_max = 0.0;
  double ramp = kInf;  // per-period |p_t - p_{t-1}| limit; kInf disables
  double c2 = 0.0, c1 = 0.0, c0 = 0.0;  // cost of per-unit output, $/h
  double p_start = 0.0, q_start = 0.0;
};

struct Load {
  index_t bus = -1;
  double p = 0.0;
  double q = 0.0;
};

struct NetworkData {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<double> vm_start;  // per bus
  std::vector<double> va_start;  // per bus, radians
  index_t reference_bus = -1;

  index_t n_buses() const { return static_cast<index_t>(buses.size()); }
  index_t n_lines() const { return static_cast<index_t>(lines.size()); }
  index_t n_generators() const {
    return static_cast<index_t>(generators.size());
  }
  index_t n_loads() const { return static_cast<index_t>(loads.size()); }
};

// Branch power entering line l at its from-terminal, with the to-terminal
// treated as receiving the same amount (single flow pair per line, so series
// loss asymmetry is not modeled).  dth = theta_from - theta_to.
struct LineFlow {
  double p = 0.0;
  double q = 0.0;
};

inline LineFlow line_flow(const Line& l, double vm, double vn, double dth) {
  const double c = std::cos(dth), s = std::sin(dth);
  LineFlow f;
  f.p = l.g * vm * vm - vm * vn * (l.g * c + l.b * s);
  f.q = -l.b * vm * vm - vm * vn * (l.g * s - l.b * c);
  return f;
}

// Per-period demand multipliers: a daily sinusoid plus uniform jitter,
// clipped below so loads never collapse to zero.  Period numbering starts
// at 1 in the phase, so a horizon of exactly 1440/resolution periods spans
// one full cycle.
struct LoadProfile {
  index_t periods = 0;
  double resolution_minutes = 0.0;
  std::uint64_t seed = 0;
  double amplitude = 0.0;
  double noise = 0.0;
  index_t n_loads = 0;
  std::vector<double> scale;  // period-major: scale[t * n_loads + j]

  double at(index_t t, index_t j) const {
    return scale[static_cast<std::size_t>(t) * n_loads + j];
  }
};

// The jitter stream is pinned to mt19937_64 with the top-53-bit mapping to
// [0,1), so profiles are bit-reproducible across platforms for a given seed.
inline LoadProfile generate_load_profile(const NetworkData& net, index_t T,
                                         double resolution_minutes,
                                         std::uint64_t seed,
                                         double amplitude = 0.2,
                                         double noise = 0.02) {
  if (T < 1) throw Error("load profile: need at least one period");
  if (resolution_minutes <= 0.0)
    throw Error("load profile: resolution must be positive");
  if (amplitude < 0.0 || amplitude >= 1.0)
    throw Error("load profile: amplitude must lie in [0, 1)");
  if (noise < 0.0) throw Error("load profile: noise must be nonnegative");

  LoadProfile prof;
  prof.periods = T;
  prof.resolution_minutes = resolution_minutes;
  prof.seed = seed;
  prof.amplitude = amplitude;
  prof.noise = noise;
  prof.n_loads = net.n_loads();
  prof.scale.resize(static_cast<std::size_t>(T) * prof.n_loads);

  std::mt19937_64 rng(seed);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (index_t t = 0; t < T; ++t) {
    const double phase =
        kTwoPi * static_cast<double>(t + 1) * resolution_minutes / 1440.0;
    const double wave = 1.0 + amplitude * std::sin(phase);
    for (index_t j = 0; j < prof.n_loads; ++j) {
      const double u01 =
          static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      const double u = 2.0 * u01 - 1.0;
      prof.scale[static_cast<std::size_t>(t) * prof.n_loads + j] =
          std::max(0.1, wave + noise * u);
    }
  }
  return prof;
}

inline std::string profile_to_csv(const LoadProfile& prof) {
  std::string out = "period";
  for (index_t j = 0; j < prof.n_loads; ++j)
    out += ",load" + std::to_string(j);
  out += "\n";
  char buf[32];
  for (index_t t = 0; t < prof.periods; ++t) {
    out += std::to_string(t + 1);
    for (index_t j = 0; j < prof.n_loads; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", prof.at(t, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// A network plus the demand trajectory it is dispatched against.  The same
// multiplier scales real and reactive demand (constant power factor).
struct MultiPeriodCase {
  NetworkData network;
  LoadProfile profile;

  index_t periods() const { return profile.periods; }
  double pd(index_t t, index_t j) const {
    return network.loads[j].p * profile.at(t, j);
  }
  double qd(index_t t, index_t j) const {
    return network.loads[j].q * profile.at(t, j);
  }
};

inline MultiPeriodCase make_case(NetworkData net, index_t T,
                                 double resolution_minutes, std::uint64_t seed,
                                 double amplitude = 0.2, double noise = 0.02) {
  LoadProfile prof = generate_load_profile(net, T, resolution_minutes, seed,
                                           amplitude, noise);
  return MultiPeriodCase{std::move(net), std::move(prof)};
}

}  // namespace gridnlp::power
