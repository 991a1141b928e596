#include "flakyci/money.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace flakyci {

money money::from_units(double units) {
  return money{std::llround(units * static_cast<double>(per_unit))};
}

std::string money::to_cents_string() const {
  const std::int64_t magnitude = micros < 0 ? -micros : micros;
  const std::int64_t cents = (magnitude + 5'000) / 10'000;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", micros < 0 ? "-" : "",
                static_cast<long long>(cents / 100),
                static_cast<long long>(cents % 100));
  return buf;
}

}  // namespace flakyci
