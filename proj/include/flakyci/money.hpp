#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace flakyci {

/// Currency amount in integer micro-units (1e-6 of the currency unit).
/// Sums are exact; conversion to dollars is for display and modelling only.
struct money {
  std::int64_t micros = 0;

  static constexpr std::int64_t per_unit = 1'000'000;

  static money from_units(double units);

  double units() const { return static_cast<double>(micros) / per_unit; }

  /// Fixed two-decimal rendering, half away from zero ("8.40").
  std::string to_cents_string() const;

  money& operator+=(money other) {
    micros += other.micros;
    return *this;
  }
  friend money operator+(money a, money b) { return money{a.micros + b.micros}; }
  friend money operator-(money a, money b) { return money{a.micros - b.micros}; }
  friend auto operator<=>(const money&, const money&) = default;
};

}  // namespace flakyci
