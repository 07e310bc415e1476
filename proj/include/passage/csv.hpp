#pragma once

#include <cstdint>
#include <initializer_list>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "passage/version.hpp"

// CSV output with a provenance stamp. The first line records the scenario
// hash, the seed, and the library version, so any result file can be traced
// back to the exact inputs that produced it. Numeric cells use %.17g, which
// round-trips doubles; reruns of the same scenario are byte-identical.

namespace passage {

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> columns,
            std::uint64_t scenario_hash, std::uint64_t seed)
      : out_(out), n_columns_(columns.size()) {
    if (columns.empty())
      throw std::invalid_argument("CsvWriter: need at least one column");
    char stamp[96];
    std::snprintf(stamp, sizeof(stamp),
                  "# scenario=%016llx seed=%llu version=%s",
                  static_cast<unsigned long long>(scenario_hash),
                  static_cast<unsigned long long>(seed), kVersion);
    out_ << stamp << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    check_width(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  // Disambiguates brace lists of string literals from the double overload.
  void row(std::initializer_list<std::string> cells) {
    row(std::vector<std::string>(cells));
  }

  void row(const std::vector<double>& cells) {
    check_width(cells.size());
    char buf[32];
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", cells[i]);
      out_ << buf;
    }
    out_ << '\n';
  }

 private:
  void check_width(std::size_t n) const {
    if (n != n_columns_)
      throw std::invalid_argument("CsvWriter: row width " + std::to_string(n) +
                                  " does not match header width " +
                                  std::to_string(n_columns_));
  }

  std::ostream& out_;
  std::size_t n_columns_;
};

}  // namespace passage
