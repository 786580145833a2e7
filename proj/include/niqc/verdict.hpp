#pragma once

#include <map>
#include <string>
#include <vector>

// Three-valued outcome used by every property check. "inconclusive" means
// the numerics could not separate the property from its negation at the
// configured tolerances; it is never silently collapsed into pass or fail.

namespace niqc {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    default: return "inconclusive";
  }
}

struct VerdictReport {
  std::string check;
  Verdict verdict = Verdict::inconclusive;
  double margin = 0;  // signed distance to the decision boundary
  std::map<std::string, double> metrics;
  std::vector<std::string> notes;
  int witness_index = -1;  // battery member behind the verdict, -1 if none

  bool passed() const { return verdict == Verdict::pass; }
};

}  // namespace niqc
