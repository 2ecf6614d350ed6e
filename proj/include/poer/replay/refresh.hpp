#pragma once

#include "poer/replay/batch.hpp"
#include "poer/rnd/rnd.hpp"

namespace poer::replay {

// Rescores every step's intrinsic reward (on its next observation) with the
// current RND and resets the priority to their sum. Used when a batch is
// replayed; the normalizer is read, never updated.
Batch refresh_priority(const Batch& batch, const rnd::RndPair& rnd);

}  // namespace poer::replay
