#pragma once

#include <iosfwd>

namespace rsoc {

// Fast built-in diagnostics (equivalence with the risk-neutral Riccati
// recursion, filter-gain optimality, derivative spot checks, determinism).
// Prints one line per check; returns the number of failed checks.
int selftest(std::ostream& out);

}  // namespace rsoc
