#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "lnmc/protocol.hpp"

namespace lnmc {

enum class PropertyId : std::uint8_t {
  P1,           // never send a REV before receiving a COMM
  P2,           // no FULF (sent or received) after ?COMM until !REV
  P3,           // after ?COMM the next send must be REV
  P4,           // always local + remote < max_accepted_htlcs
  P5,           // always eventually FUNDED or FAIL_CHANNEL
  Deadlock,     // built in: no terminal non-end state
  NonProgress,  // built in: no cycle avoiding FUNDED
};

enum class CheckerKind : std::uint8_t {
  NeverClaim,      // claim automaton that must never match (P1, P2)
  MustMatchTrace,  // claim automaton every run must match (P3)
  StateInvariant,  // per-state predicate (P4)
  BuchiNegation,   // cycle search for the negated formula (P5)
  Builtin,         // deadlock / non-progress
};

// The alphabet the claims read: one peer sending (!m) or receiving (?m) a
// message, observed at the enqueue / dequeue moment.
enum class Direction : std::uint8_t { Send, Receive };

struct ObservableEvent {
  Role actor;
  Direction dir;
  MessageType kind;
};

// Claims are instantiated per peer; a violation by either peer is a
// violation. The claim automata are small enough that a claim state fits a
// byte (bit 0 is the only live bit for P1/P2/P3).
using ClaimState = std::uint8_t;

enum class ClaimVerdict : std::uint8_t { Advance, Violation, Discard };

struct ClaimStep {
  ClaimVerdict verdict{ClaimVerdict::Advance};
  ClaimState next{0};
};

struct PropertyChecker {
  PropertyId id;
  CheckerKind kind;
};

PropertyChecker build(PropertyId id);

ClaimState claim_initial(const PropertyChecker&);

// Pure transition of the claim automaton over one observable event of the
// peer it is instantiated for.
ClaimStep claim_step(const PropertyChecker&, ClaimState state,
                     const ObservableEvent& event);

// State-snapshot step: the instantiated peer just entered FAIL_CHANNEL.
// P3 treats failing the channel while a REV is owed as a violation.
ClaimStep claim_channel_failed(const PropertyChecker&, ClaimState state);

// State invariant checkers (P4). True when the state satisfies the property.
bool state_invariant_holds(const PropertyChecker&, const PeerMachine& peer,
                           unsigned max_htlcs);

// For the cycle searches: true when this peer state counts as progress, i.e.
// a cycle made only of states where no instantiated peer progresses is a
// violation witness.
bool liveness_progress_state(PropertyId id, FsmState s);

std::string_view to_string(PropertyId id);
std::optional<PropertyId> property_id_from(std::string_view name);

}  // namespace lnmc
