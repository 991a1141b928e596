#include "flakyci/csv.hpp"
#include "flakyci/errors.hpp"
#include "flakyci/kv_file.hpp"
#include "flakyci/money.hpp"
#include "flakyci/rng.hpp"
#include "flakyci/time.hpp"

#include <doctest.h>

#include <set>
#include <sstream>

using namespace flakyci;

TEST_CASE("rfc3339 parse and format") {
  const auto t = parse_rfc3339("2024-07-11T10:00:00Z");
  CHECK(format_rfc3339(t) == "2024-07-11T10:00:00Z");
  CHECK(parse_rfc3339("2024-07-11T12:00:00+02:00") == t);
  CHECK(parse_rfc3339("2024-07-11T05:30:00-04:30") == t);
  CHECK(format_rfc3339(parse_rfc3339("2024-07-11T10:00:00.25Z")) ==
        "2024-07-11T10:00:00.250Z");
  CHECK(format_date(t) == "2024-07-11");
  CHECK(format_rfc3339(floor_to_day(t)) == "2024-07-11T00:00:00Z");
  CHECK(days_between(parse_rfc3339("2024-02-28T00:00:00Z"),
                     parse_rfc3339("2024-03-01T00:00:00Z")) == 2.0);
}

TEST_CASE("rfc3339 rejects naive and malformed timestamps") {
  for (const char* bad : {"2024-07-11T10:00:00", "2024-07-11", "2024-13-01T00:00:00Z",
                          "2024-02-30T00:00:00Z", "2024-07-11T25:00:00Z", "", "garbage"})
    CHECK_THROWS_AS(parse_rfc3339(bad), input_error);
}

TEST_CASE("money keeps micro units and rounds cents half away from zero") {
  CHECK(money::from_units(0.14).micros == 140'000);
  CHECK(money::from_units(8.4).to_cents_string() == "8.40");
  CHECK(money{4'995}.to_cents_string() == "0.00");
  CHECK(money{5'000}.to_cents_string() == "0.01");
  CHECK(money{-5'000}.to_cents_string() == "-0.01");
  CHECK(money{444'689'000'000}.to_cents_string() == "444689.00");
  CHECK((money{1} + money{2}).micros == 3);
}

TEST_CASE("csv quoting round-trips") {
  const csv::row fields{"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
  std::stringstream io;
  csv::write_row(io, fields);
  csv::row back;
  REQUIRE(csv::read_row(io, back));
  CHECK(back == fields);
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("ab") == "ab");
}

TEST_CASE("kv file") {
  std::istringstream in("# comment\nk = 8\nrate=0.5  # trailing\nflag = yes\n\nname = a b\n");
  const auto kv = kv_file::parse(in);
  CHECK(kv.get_int("k", 0) == 8);
  CHECK(kv.get_double("rate", 0) == 0.5);
  CHECK(kv.get_bool("flag", false));
  CHECK(kv.get("name") == "a b");
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(kv.get_int("rate", 0), input_error);
}

TEST_CASE("rng is deterministic and in range") {
  rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs |= x != c.next();
  }
  CHECK(differs);
  rng r(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10'000; ++i) {
    const double u = r.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    const auto k = r.below(6);
    CHECK(k < 6);
    seen.insert(k);
  }
  CHECK(seen.size() == 6);
  CHECK(derive_seed(5, 0) != derive_seed(5, 1));
}

TEST_CASE("lognormal median") {
  rng r(11);
  std::vector<double> xs;
  for (int i = 0; i < 20'001; ++i) xs.push_back(r.lognormal(240.0, 1.2));
  std::nth_element(xs.begin(), xs.begin() + 10'000, xs.end());
  CHECK(xs[10'000] == doctest::Approx(240.0).epsilon(0.05));
}
