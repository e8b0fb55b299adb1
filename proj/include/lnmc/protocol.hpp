#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace lnmc {

// Peer-local states of the channel-operation payment flow.
//
// A payment round moves a peer through the six intermediate states and back
// to FUNDED. The committer of an exchange waits in WAIT_REVOCATION /
// WAIT_REVOCATION_2; the responder answers a received commitment with a
// revocation in the same step. FAIL_CHANNEL is absorbing.
enum class FsmState : std::uint8_t {
  Funded = 0,
  MoreHtlcsWait,
  WaitCommitmentSig,
  WaitRevocation,
  WaitFulfillment,
  WaitCommitmentSig2,
  WaitRevocation2,
  FailChannel,
};

inline constexpr std::size_t kFsmStateCount = 8;

// The seven channel-operation message types.
enum class MessageType : std::uint8_t {
  Add = 0,   // UPDATE_ADD_HTLC
  Comm,      // COMMITMENT_SIGNED
  Rev,       // REVOKE_AND_ACK
  Fulf,      // UPDATE_FULFILL_HTLC
  Err,       // ERROR
  Fail,      // UPDATE_FAIL_HTLC
  Failm,     // UPDATE_FAIL_MALFORMED_HTLC
};

inline constexpr std::size_t kMessageTypeCount = 7;

// Abstract stand-in for payload well-formedness. The sender picks the
// validity when it emits a message; receivers react to it instead of parsing
// real payloads. InvalidMalformed is only meaningful for Add (it draws a
// FAILM instead of a FAIL).
enum class Validity : std::uint8_t {
  Valid = 0,
  InvalidSemantic,
  InvalidMalformed,
};

struct Message {
  MessageType kind{MessageType::Add};
  Validity validity{Validity::Valid};
  std::uint16_t htlc_id{0};  // Add/Fulf correlation, per channel direction

  friend bool operator==(const Message&, const Message&) = default;
};

enum class Role : std::uint8_t { A = 0, B };

constexpr Role other(Role r) { return r == Role::A ? Role::B : Role::A; }

// One peer's protocol state. The armed timer is a function of the state:
// every intermediate state arms its timer (tag = state name + "_T"), the two
// end states arm none.
struct PeerMachine {
  FsmState state{FsmState::Funded};
  std::uint16_t local_htlcs{0};   // HTLCs this peer opened
  std::uint16_t remote_htlcs{0};  // HTLCs the counterparty opened
  Role role{Role::A};

  bool timer_armed() const {
    return state != FsmState::Funded && state != FsmState::FailChannel;
  }
  bool is_end_state() const;
  bool is_progress_state() const;
  std::uint32_t open_htlcs() const {
    return std::uint32_t{local_htlcs} + remote_htlcs;
  }

  friend bool operator==(const PeerMachine&, const PeerMachine&) = default;
};

bool is_end_state(FsmState s);       // FUNDED, FAIL_CHANNEL
bool is_progress_state(FsmState s);  // FUNDED only

PeerMachine initial_peer(Role role);

enum class ActionType : std::uint8_t {
  Deliver = 0,     // consume the message at the head of the inbound buffer
  Timeout,         // armed timer fires; fail the channel silently
  InitiateAdd,     // spontaneously open an HTLC (emits ADD)
  InitiateCommit,  // spontaneously commit (emits COMM)
  InitiateFulfill, // spontaneously fulfill a remote HTLC (emits FULF)
  InitiateError,   // spontaneously fail the channel with an ERR
};

// All nondeterminism is reified here: Deliver carries the consumed message,
// `emit` fixes the validity the peer chooses for whatever it sends in this
// step (the emitted ADD/COMM/FULF, or the REV that answers a COMM), and a
// delivery that kills the channel comes in a silent and an ERR-announcing
// variant.
struct Action {
  ActionType type{ActionType::Timeout};
  Message msg{};                    // Deliver only: the consumed message
  Validity emit{Validity::Valid};   // validity of the emitted message, if any
  bool reply_err{false};            // aborting Deliver only: also send an ERR

  friend bool operator==(const Action&, const Action&) = default;
};

struct ApplyResult {
  PeerMachine peer;
  std::optional<Message> emitted;
};

class IllegalAction : public std::logic_error {
 public:
  explicit IllegalAction(const std::string& what) : std::logic_error(what) {}
};

// Every action whose transition is defined at peer.state. Deliver appears
// only when inbox_head is present; actions that emit require outbox room;
// InitiateAdd additionally requires local + remote < max_htlcs.
std::vector<Action> enabled_actions(const PeerMachine& peer,
                                    const std::optional<Message>& inbox_head,
                                    bool outbox_has_room,
                                    unsigned max_htlcs);

// Atomic transition: consume/decide, update state, emit at most one message.
// Throws IllegalAction if the action is not enabled for this peer.
ApplyResult apply(const PeerMachine& peer, const Action& action,
                  unsigned max_htlcs);

// Declarative shape of the machine. Edges are classified by the message kind
// they exchange; every edge into FAIL_CHANNEL (timeout, local error, error
// message, unexpected or invalid delivery) is an Abort edge. The table has
// exactly 19 distinct triples.
enum class TransitionClass : std::uint8_t { Add, Commit, Revoke, Fulfill, Abort };

struct TransitionTriple {
  FsmState source;
  TransitionClass cls;
  FsmState target;

  friend bool operator==(const TransitionTriple&, const TransitionTriple&) = default;
};

inline constexpr std::size_t kTransitionCount = 19;

const std::array<TransitionTriple, kTransitionCount>& transition_table();

TransitionClass classify_transition(FsmState source, const Action& action,
                                    FsmState target);

std::string_view to_string(FsmState s);
std::string_view to_string(MessageType k);
std::string_view to_string(Validity v);
std::string_view to_string(Role r);
std::string_view to_string(ActionType t);
std::string_view to_string(TransitionClass c);
std::string_view timer_tag(FsmState s);  // "" for the end states

std::optional<FsmState> fsm_state_from(std::string_view name);
std::optional<MessageType> message_type_from(std::string_view name);
std::optional<Validity> validity_from(std::string_view name);

}  // namespace lnmc
