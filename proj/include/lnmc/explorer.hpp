#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lnmc/config.hpp"
#include "lnmc/network.hpp"
#include "lnmc/properties.hpp"
#include "lnmc/protocol.hpp"

namespace lnmc {

// Composed system state: two peer machines, the duplex link, and (when a
// claim product is running) one claim state per peer. Equality and the
// canonical encoding agree.
struct GlobalState {
  PeerMachine peer_a;
  PeerMachine peer_b;
  DuplexLink link;
  ClaimState claim_a{0};
  ClaimState claim_b{0};

  PeerMachine& peer(Role r) { return r == Role::A ? peer_a : peer_b; }
  const PeerMachine& peer(Role r) const {
    return r == Role::A ? peer_a : peer_b;
  }

  friend bool operator==(const GlobalState&, const GlobalState&) = default;
};

// Model parts only; claim bookkeeping excluded.
bool model_equal(const GlobalState& a, const GlobalState& b);

// One labeled edge of the global transition relation: exactly one actor acts.
struct Event {
  Role actor{Role::A};
  Action action{};
  std::optional<Message> emitted;

  friend bool operator==(const Event&, const Event&) = default;
};

struct TraceStep {
  GlobalState state;  // state before the event
  Event event;
};

struct Trace {
  std::vector<TraceStep> steps;
  GlobalState final_state;

  std::size_t length() const { return steps.size(); }
};

// Stem plus closed cycle; the witness for liveness violations.
struct LassoTrace {
  Trace stem;
  Trace cycle;
};

struct ExplorationReport {
  std::uint64_t states_visited{0};
  std::uint64_t transitions_fired{0};
  std::vector<Trace> deadlocks;
  std::uint64_t peak_frontier{0};
  double elapsed_seconds{0};
  std::uint64_t peak_memory_bytes{0};
};

class StateSpaceBudgetExceeded : public std::runtime_error {
 public:
  explicit StateSpaceBudgetExceeded(std::uint64_t cap)
      : std::runtime_error("state cap of " + std::to_string(cap) +
                           " states exceeded") {}
};

GlobalState initial_state(const ModelConfig&);

// Union over both actors of every enabled action, applied atomically.
// Deliveries consume from the actor's inbound buffer; emissions require room
// in its outbound buffer. Deterministic order, duplicate-free.
std::vector<std::pair<Event, GlobalState>> successors(const GlobalState&,
                                                      const ModelConfig&);

// Applies one event, validating that it is enabled. Claim fields pass
// through untouched.
GlobalState apply_event(const GlobalState&, const Event&, const ModelConfig&);

// Injective byte encoding of a state; equal states encode identically.
std::string canonical_encoding(const GlobalState&);
GlobalState decode_state(const std::string& encoding, const ModelConfig&);
std::uint64_t canonical_hash(const GlobalState&);

std::vector<ObservableEvent> observable_events(const Event&);

// Visits every reachable state exactly once (dedup by canonical encoding);
// terminal states where a peer is not in an end state are recorded as
// deadlocks with their traces. Throws StateSpaceBudgetExceeded past a
// nonzero config.state_cap.
ExplorationReport explore(const ModelConfig&);

// The explorer's view of the reachable state set, in visit order.
std::vector<GlobalState> reachable_states(const ModelConfig&);

struct SafetySearchResult {
  std::optional<Trace> violation;
  std::uint64_t states_visited{0};
  std::uint64_t transitions_fired{0};
  double elapsed_seconds{0};
};

// BFS over the product of model and claim; returns a shortest violating
// trace (minimum number of events) if one exists.
SafetySearchResult find_safety_violation_detail(const ModelConfig&,
                                                const PropertyChecker&);
std::optional<Trace> find_safety_violation(const ModelConfig&,
                                           const PropertyChecker&);

struct CycleSearchResult {
  std::optional<LassoTrace> lasso;
  std::uint64_t states_visited{0};
  double elapsed_seconds{0};
};

// Searches for a reachable cycle lying entirely in progress-free states (for
// NONPROGRESS: no peer in FUNDED anywhere on the cycle; for P5: one peer
// avoiding both FUNDED and FAIL_CHANNEL around the whole cycle).
CycleSearchResult find_acceptance_cycle_detail(const ModelConfig&,
                                               const PropertyChecker&);
std::optional<LassoTrace> find_acceptance_cycle(const ModelConfig&,
                                                const PropertyChecker&);

// Replays a trace from the initial state through apply_event and checks the
// recorded states match (model parts; claim bookkeeping ignored).
bool replay_trace(const Trace&, const ModelConfig&);
bool replay_lasso(const LassoTrace&, const ModelConfig&);

struct PropertyRunResult {
  PropertyId id{PropertyId::P1};
  bool holds{false};
  std::uint64_t states_visited{0};
  double elapsed_seconds{0};
  std::optional<Trace> violation;
  std::optional<LassoTrace> lasso;
};

// Dispatches a property to the right search and reports the verdict.
PropertyRunResult run_property(const ModelConfig&, PropertyId);

std::uint64_t peak_rss_bytes();

}  // namespace lnmc
