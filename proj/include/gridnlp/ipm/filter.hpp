#pragma once

#include <utility>
#include <vector>

namespace gridnlp::ipm {

// Line-search filter over (constraint violation, barrier objective) pairs.
// Entries are stored with their acceptance margins already applied, so a
// trial point is acceptable iff it improves on one coordinate of every entry.
class Filter {
public:
  void reset() { entries_.clear(); }

  bool acceptable(double theta, double phi) const {
    for (const auto& [t, p] : entries_)
      if (theta >= t && phi >= p) return false;
    return true;
  }

  // Blocks the region dominated by (theta, phi); called when an iterate is
  // accepted without the Armijo decrease on the barrier objective.
  void add(double theta, double phi, double gamma_theta, double gamma_phi) {
    entries_.emplace_back((1.0 - gamma_theta) * theta,
                          phi - gamma_phi * theta);
  }

  size_t size() const { return entries_.size(); }

private:
  std::vector<std::pair<double, double>> entries_;
};

}  // namespace gridnlp::ipm
