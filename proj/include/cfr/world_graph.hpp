#pragma once

#include "cfr/scm.hpp"
#include "cfr/world.hpp"

namespace cfr {

// The page model as a structural equation model over the nodes
// u, v, x, a, b, q, s, c, y, z. Simulating it with (seed, index) yields the
// same page as simulate_page.
scm::ScmGraph ad_world_graph(const WorldConfig& cfg, const Policy& pol);

// Replacement of the score factor q by the law of another policy.
scm::Intervention score_intervention(const WorldConfig& cfg, const Policy& pol);

LogRecord record_from_assignment(const scm::Assignment& a, std::uint64_t seed, std::uint64_t index);

// Builtin kinds plus the "adworld.*" kinds; params carry config and policy.
scm::FactorRegistry ad_world_registry();

}  // namespace cfr
