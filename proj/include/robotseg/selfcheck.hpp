#pragma once

#include <iosfwd>

namespace robotseg {

// Deterministic diagnostic battery: gradient spot checks, clustering and
// metric oracles, identity gates, seeded-model reproducibility. One line per
// check; the output is bit-stable across runs (no timing, fixed seeds).
// Returns true when every check passes.
bool selfcheck(std::ostream& out);

}  // namespace robotseg
