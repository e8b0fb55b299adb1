#pragma once

#include "lnmc/explorer.hpp"

namespace lnmc {

// A scripted single-HTLC payment that completes and returns both peers to
// FUNDED: add, first commitment/revocation exchange, fulfillment, second
// commitment/revocation exchange.
Trace honest_payment_trace(const ModelConfig&);

// The shortest trace violating strict channel determinacy, as found by the
// breadth-first search: A adds and commits, B receives both and fails the
// channel without ever sending a REV.
Trace payout_race_trace(const ModelConfig&);

// The shortest trace filling the channel to max_accepted_htlcs.
Trace congestion_trace(const ModelConfig&);

}  // namespace lnmc
