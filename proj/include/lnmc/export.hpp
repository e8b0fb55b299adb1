#pragma once

#include <string>

#include "lnmc/explorer.hpp"
#include "lnmc/settlement.hpp"

namespace lnmc {

// FSM rendered as a graph: all 8 states, the 19 transition-table edges.
std::string fsm_to_dot();

// Line-oriented trace document, one record per event with fixed field order:
// step index | actor | action | message kind/validity/id | post-state A |
// post-state B | buffer a->b | buffer b->a | claim state | emitted message.
// Byte-stable across runs for identical inputs.
std::string trace_to_text(const Trace&, const ModelConfig&);
std::string lasso_to_text(const LassoTrace&, const ModelConfig&);

// Parses a trace document back, replaying the recorded events from the
// initial state and checking every recorded post-state on the way. Throws
// std::runtime_error on any mismatch.
Trace trace_from_text(const std::string& text, const ModelConfig&);

std::string report_to_plain(const ExplorationReport&, bool deterministic);
std::string report_to_structured(const ExplorationReport&, bool deterministic);

std::string summary_to_text(const PayoutSummary&);

}  // namespace lnmc
