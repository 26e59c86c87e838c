#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "effop/linalg.hpp"

namespace effop {

/// One named check. By default passes when measured <= tol; `lower_bound`
/// checks pass when measured >= tol instead.
struct Check {
  std::string name;
  bool passed = true;
  double measured = 0.0;
  double tol = 0.0;
  bool lower_bound = false;
};

/// Line-oriented check report. Repeated checks with the same name fold into
/// one entry keeping the worst measurement, so aggregation does not depend
/// on trial order.
class Report {
 public:
  void record(const std::string& name, double measured, double tol) {
    fold({name, std::isfinite(measured) && measured <= tol, measured, tol, false});
  }

  void record_at_least(const std::string& name, double measured, double threshold) {
    fold({name, std::isfinite(measured) && measured >= threshold, measured, threshold, true});
  }

  /// Pass/fail check without a natural residual (reported as 0 or 1).
  void record_flag(const std::string& name, bool ok) { record(name, ok ? 0.0 : 1.0, 0.0); }

  void set_provenance(const std::string& key, const std::string& value) { provenance_[key] = value; }
  void note(const std::string& text) { notes_.push_back(text); }

  bool all_passed() const {
    for (const auto& c : checks_)
      if (!c.passed) return false;
    return true;
  }

  const std::vector<Check>& checks() const { return checks_; }
  const Check* find(const std::string& name) const {
    for (const auto& c : checks_)
      if (c.name == name) return &c;
    return nullptr;
  }

  void print(std::ostream& out) const {
    for (const auto& [k, v] : provenance_) out << "# " << k << "=" << v << '\n';
    for (const auto& n : notes_) out << "# " << n << '\n';
    for (const auto& c : checks_) {
      std::ostringstream line;
      line << "CHECK " << c.name << ' ' << (c.passed ? "pass" : "fail") << std::setprecision(3)
           << std::scientific << " residual=" << c.measured << " tol=" << c.tol;
      out << line.str() << '\n';
    }
  }

 private:
  void fold(Check c) {
    for (auto& existing : checks_) {
      if (existing.name != c.name) continue;
      const bool worse = !c.passed ? existing.passed || worse_than(c, existing)
                                   : existing.passed && worse_than(c, existing);
      if (worse) existing = c;
      return;
    }
    checks_.push_back(std::move(c));
  }

  static bool worse_than(const Check& a, const Check& b) {
    if (!std::isfinite(a.measured)) return true;
    return a.lower_bound ? a.measured < b.measured : a.measured > b.measured;
  }

  std::vector<Check> checks_;
  std::map<std::string, std::string> provenance_;
  std::vector<std::string> notes_;
};

/// FNV-1a over the raw entries of a matrix; a stable input fingerprint.
inline std::uint64_t fingerprint(const Matrix& m) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int64_t dims[2] = {static_cast<std::int64_t>(m.rows()), static_cast<std::int64_t>(m.cols())};
  mix(dims, sizeof dims);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) {
      const double parts[2] = {m(i, j).real(), m(i, j).imag()};
      mix(parts, sizeof parts);
    }
  return h;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace effop
