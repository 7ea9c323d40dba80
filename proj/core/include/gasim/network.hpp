#pragma once

#include "gasim/rng.hpp"
#include "gasim/types.hpp"

namespace gasim {

/// Synthetic follow network with a long-tailed in-degree distribution.
///
/// Growth: a seed clique, then each new node follows a fixed number of
/// existing nodes picked by a preferential-attachment / uniform mixture.
/// Nodes left with fewer than ten followers afterwards receive uniformly
/// random extra followers, so min in-degree >= 10 and the empirical mean
/// in-degree lands in [15, 25] at n = 10,000. Interaction edges are the
/// symmetrized follow edges with weight 1.0. Requires n_agents >= 11.
SocialGraph generate_network(int n_agents, Rng rng);

}  // namespace gasim
