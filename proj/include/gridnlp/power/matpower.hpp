#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gridnlp/common.hpp"
#include "gridnlp/power/network.hpp"

namespace gridnlp::power {

// Knobs applied while turning raw case data into a NetworkData.
struct MatpowerOptions {
  // MATPOWER ramp columns are almost always zero ("unspecified") and are
  // quoted per 10/30 minutes rather than per scheduling period, so instead
  // each generator gets ramp = ramp_fraction * Pmax.  kInf disables ramping.
  double ramp_fraction = 0.1;
};

namespace detail {

inline std::string strip_matlab_comments(std::string_view text) {
  std::string out(text);
  bool in_comment = false;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] == '%') in_comment = true;
    if (out[i] == '\n') in_comment = false;
    if (in_comment) out[i] = ' ';
  }
  return out;
}

inline std::size_t find_field(const std::string& text, const std::string& name,
                              const char* what) {
  const std::string key = "mpc." + name;
  std::size_t pos = 0;
  while ((pos = text.find(key, pos)) != std::string::npos) {
    const std::size_t after = pos + key.size();
    // Reject identifiers that merely start with the key (e.g. mpc.buses).
    if (after < text.size() &&
        (std::isalnum(static_cast<unsigned char>(text[after])) ||
         text[after] == '_')) {
      pos = after;
      continue;
    }
    std::size_t eq = text.find_first_not_of(" \t\r\n", after);
    if (eq == std::string::npos || text[eq] != '=')
      throw Error(std::string("matpower: expected '=' after ") + key);
    return eq + 1;
  }
  throw Error(std::string("matpower: missing ") + key + " (" + what + ")");
}

inline double parse_scalar(const std::string& text, const std::string& name) {
  std::size_t pos = find_field(text, name, "scalar");
  const char* begin = text.c_str() + pos;
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw Error("matpower: mpc." + name + " is not a number");
  return v;
}

using Matrix = std::vector<std::vector<double>>;

inline Matrix parse_matrix(const std::string& text, const std::string& name) {
  std::size_t pos = find_field(text, name, "matrix");
  pos = text.find_first_not_of(" \t\r\n", pos);
  if (pos == std::string::npos || text[pos] != '[')
    throw Error("matpower: mpc." + name + " is not a matrix");
  ++pos;

  Matrix rows;
  std::vector<double> row;
  auto end_row = [&] {
    if (!row.empty()) rows.push_back(std::move(row)), row.clear();
  };
  while (pos < text.size()) {
    const char c = text[pos];
    if (c == ']') {
      end_row();
      return rows;
    }
    if (c == ';' || c == '\n') {
      end_row();
      ++pos;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r' || c == ',') {
      ++pos;
      continue;
    }
    const char* begin = text.c_str() + pos;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin)
      throw Error("matpower: mpc." + name + " row " +
                  std::to_string(rows.size() + 1) + ": malformed matrix row");
    row.push_back(v);
    pos += static_cast<std::size_t>(end - begin);
  }
  throw Error("matpower: mpc." + name + ": missing closing ']'");
}

inline void need_columns(const Matrix& m, std::size_t ncols,
                         const std::string& name) {
  for (std::size_t r = 0; r < m.size(); ++r)
    if (m[r].size() < ncols)
      throw Error("matpower: mpc." + name + " row " + std::to_string(r + 1) +
                  ": expected at least " + std::to_string(ncols) +
                  " columns, got " + std::to_string(m[r].size()));
}

}  // namespace detail

inline NetworkData parse_matpower(std::string_view raw,
                                  const MatpowerOptions& opt = {}) {
  const std::string text = detail::strip_matlab_comments(raw);

  NetworkData net;
  net.base_mva = detail::parse_scalar(text, "baseMVA");
  if (!(net.base_mva > 0.0)) throw Error("matpower: baseMVA must be positive");
  const double base = net.base_mva;

  const detail::Matrix bus = detail::parse_matrix(text, "bus");
  const detail::Matrix gen = detail::parse_matrix(text, "gen");
  const detail::Matrix branch = detail::parse_matrix(text, "branch");
  const detail::Matrix gencost = detail::parse_matrix(text, "gencost");
  detail::need_columns(bus, 13, "bus");
  detail::need_columns(gen, 10, "gen");
  detail::need_columns(branch, 11, "branch");
  detail::need_columns(gencost, 4, "gencost");

  // --- buses -----------------------------------------------------------
  std::unordered_map<int, index_t> bus_index;
  for (const auto& r : bus) {
    const int id = static_cast<int>(r[0]);
    const int type = static_cast<int>(r[1]);
    if (bus_index.count(id))
      throw Error("matpower: duplicate bus " + std::to_string(id));
    if (type == 4)
      throw Error("matpower: bus " + std::to_string(id) +
                  " is isolated (type 4), not supported");
    if (r[4] != 0.0 || r[5] != 0.0)
      throw Error("matpower: bus " + std::to_string(id) +
                  " has a shunt (GS/BS), not supported");
    Bus b;
    b.id = id;
    b.v_max = r[11];
    b.v_min = r[12];
    if (!(b.v_min > 0.0) || b.v_min > b.v_max)
      throw Error("matpower: bus " + std::to_string(id) +
                  ": bad voltage bounds");
    b.reference = (type == 3);
    bus_index[id] = net.n_buses();
    net.buses.push_back(b);
    net.vm_start.push_back(r[7]);
    net.va_start.push_back(r[8] * kPi / 180.0);
    if (r[2] != 0.0 || r[3] != 0.0)
      net.loads.push_back(
          Load{bus_index[id], r[2] / base, r[3] / base});
    if (b.reference) {
      if (net.reference_bus >= 0)
        throw Error("matpower: more than one reference bus");
      net.reference_bus = bus_index[id];
    }
  }
  if (net.reference_bus < 0) throw Error("matpower: missing reference bus");

  auto lookup_bus = [&](double raw_id, const char* where) {
    const int id = static_cast<int>(raw_id);
    auto it = bus_index.find(id);
    if (it == bus_index.end())
      throw Error(std::string("matpower: ") + where + " references unknown bus " +
                  std::to_string(id));
    return it->second;
  };

  // --- generators (with their matching cost rows) ----------------------
  if (gencost.size() < gen.size())
    throw Error("matpower: gencost has fewer rows than gen");
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto& r = gen[i];
    if (r[7] <= 0.0) continue;  // out of service
    Generator g;
    g.bus = lookup_bus(r[0], "gen");
    g.p_start = r[1] / base;
    g.q_start = r[2] / base;
    g.q_max = r[3] / base;
    g.q_min = r[4] / base;
    g.p_max = r[8] / base;
    g.p_min = r[9] / base;
    if (g.p_min > g.p_max || g.q_min > g.q_max)
      throw Error("matpower: gen row " + std::to_string(i + 1) +
                  ": inverted capacity bounds");
    g.ramp = opt.ramp_fraction < kInf
                 ? opt.ramp_fraction * std::max(g.p_max, 0.0)
                 : kInf;

    const auto& c = gencost[i];
    if (static_cast<int>(c[0]) == 1)
      throw Error("matpower: gen row " + std::to_string(i + 1) +
                  ": piecewise-linear cost not supported");
    if (static_cast<int>(c[0]) != 2)
      throw Error("matpower: gen row " + std::to_string(i + 1) +
                  ": unknown cost model " + std::to_string(c[0]));
    const int ncost = static_cast<int>(c[3]);
    if (ncost < 1 || c.size() < static_cast<std::size_t>(4 + ncost))
      throw Error("matpower: gencost row " + std::to_string(i + 1) +
                  ": bad coefficient count");
    // Coefficients are highest degree first, in $/MWh powers; fold the MVA
    // base in so the cost applies to per-unit output.
    double coeff[3] = {0.0, 0.0, 0.0};  // c2, c1, c0
    for (int k = 0; k < ncost; ++k) {
      const double v = c[4 + k];
      const int degree = ncost - 1 - k;
      if (degree > 2) {
        if (v != 0.0)
          throw Error("matpower: gencost row " + std::to_string(i + 1) +
                      ": polynomial above degree 2 not supported");
        continue;
      }
      coeff[2 - degree] = v;
    }
    g.c2 = coeff[0] * base * base;
    g.c1 = coeff[1] * base;
    g.c0 = coeff[2];
    net.generators.push_back(g);
  }

  // --- branches ---------------------------------------------------------
  for (std::size_t i = 0; i < branch.size(); ++i) {
    const auto& r = branch[i];
    if (r[10] == 0.0) continue;  // out of service
    if (r[8] != 0.0 && r[8] != 1.0)
      throw Error("matpower: branch row " + std::to_string(i + 1) +
                  ": transformer tap ratio not supported");
    if (r[9] != 0.0)
      throw Error("matpower: branch row " + std::to_string(i + 1) +
                  ": phase shifter not supported");
    Line l;
    l.from = lookup_bus(r[0], "branch");
    l.to = lookup_bus(r[1], "branch");
    const double rr = r[2], xx = r[3];
    const double z2 = rr * rr + xx * xx;
    if (z2 <= 0.0)
      throw Error("matpower: branch row " + std::to_string(i + 1) +
                  ": zero series impedance");
    l.g = rr / z2;
    l.b = -xx / z2;
    l.s_max = r[5] > 0.0 ? r[5] / base : kInf;  // RATE_A = 0 means unlimited
    // Angle-difference bounds; 0/0 or beyond +-360 degrees is the MATPOWER
    // idiom for "unconstrained", replaced with a +-60 degree box so the row
    // stays meaningful.
    double amin = r.size() >= 13 ? r[11] : 0.0;
    double amax = r.size() >= 13 ? r[12] : 0.0;
    const bool unset = (amin == 0.0 && amax == 0.0);
    if (unset || amin <= -360.0) amin = -60.0;
    if (unset || amax >= 360.0) amax = 60.0;
    if (amin >= amax)
      throw Error("matpower: branch row " + std::to_string(i + 1) +
                  ": inverted angle bounds");
    l.angle_min = amin * kPi / 180.0;
    l.angle_max = amax * kPi / 180.0;
    net.lines.push_back(l);
  }

  return net;
}

inline NetworkData parse_matpower_file(const std::string& path,
                                       const MatpowerOptions& opt = {}) {
  return parse_matpower(read_text_file(path), opt);
}

}  // namespace gridnlp::power
