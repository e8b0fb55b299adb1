#include "lnmc/protocol.hpp"

namespace lnmc {

namespace {

bool under_htlc_limit(const PeerMachine& p, unsigned max_htlcs) {
  return p.open_htlcs() < max_htlcs;
}

bool is_error_kind(MessageType k) {
  return k == MessageType::Err || k == MessageType::Fail ||
         k == MessageType::Failm;
}

PeerMachine failed(PeerMachine p) {
  p.state = FsmState::FailChannel;
  return p;
}

ApplyResult deliver(const PeerMachine& peer, const Message& m,
                    Validity reply_validity, bool reply_err,
                    unsigned max_htlcs);

}  // namespace

bool is_end_state(FsmState s) {
  return s == FsmState::Funded || s == FsmState::FailChannel;
}

bool is_progress_state(FsmState s) { return s == FsmState::Funded; }

bool PeerMachine::is_end_state() const { return lnmc::is_end_state(state); }
bool PeerMachine::is_progress_state() const {
  return lnmc::is_progress_state(state);
}

PeerMachine initial_peer(Role role) {
  PeerMachine p;
  p.state = FsmState::Funded;
  p.local_htlcs = 0;
  p.remote_htlcs = 0;
  p.role = role;
  return p;
}

std::vector<Action> enabled_actions(const PeerMachine& peer,
                                    const std::optional<Message>& inbox_head,
                                    bool outbox_has_room,
                                    unsigned max_htlcs) {
  std::vector<Action> acts;
  if (peer.state == FsmState::FailChannel) return acts;  // absorbing

  if (inbox_head) {
    const Message& m = *inbox_head;
    // An accepted COMM answers with a REV whose validity the responder
    // chooses; expose both choices as distinct actions.
    bool replies_rev =
        m.kind == MessageType::Comm && m.validity == Validity::Valid &&
        (peer.state == FsmState::MoreHtlcsWait ||
         peer.state == FsmState::WaitCommitmentSig2);
    if (replies_rev) {
      if (outbox_has_room) {
        acts.push_back({ActionType::Deliver, m, Validity::Valid});
        acts.push_back({ActionType::Deliver, m, Validity::InvalidSemantic});
      }
    } else {
      ApplyResult probe = deliver(peer, m, Validity::Valid, false, max_htlcs);
      bool aborts = probe.peer.state == FsmState::FailChannel;
      if (aborts && !is_error_kind(m.kind)) {
        // An invalid or unexpected message kills the channel either
        // silently or with an announcing ERR.
        acts.push_back({ActionType::Deliver, m});
        if (outbox_has_room)
          acts.push_back({ActionType::Deliver, m, Validity::Valid, true});
      } else if (!probe.emitted || outbox_has_room) {
        acts.push_back({ActionType::Deliver, m});
      }
    }
  }

  if (peer.timer_armed()) acts.push_back({ActionType::Timeout});

  bool may_add = peer.state == FsmState::Funded ||
                 peer.state == FsmState::MoreHtlcsWait;
  if (may_add && under_htlc_limit(peer, max_htlcs) && outbox_has_room) {
    acts.push_back({ActionType::InitiateAdd, {}, Validity::Valid});
    acts.push_back({ActionType::InitiateAdd, {}, Validity::InvalidSemantic});
    acts.push_back({ActionType::InitiateAdd, {}, Validity::InvalidMalformed});
  }

  bool may_commit = peer.state == FsmState::MoreHtlcsWait ||
                    peer.state == FsmState::WaitCommitmentSig;
  if (may_commit && outbox_has_room) {
    acts.push_back({ActionType::InitiateCommit, {}, Validity::Valid});
    acts.push_back({ActionType::InitiateCommit, {}, Validity::InvalidSemantic});
  }

  if (peer.state == FsmState::WaitFulfillment && peer.remote_htlcs > 0 &&
      outbox_has_room) {
    acts.push_back({ActionType::InitiateFulfill, {}, Validity::Valid});
    acts.push_back({ActionType::InitiateFulfill, {}, Validity::InvalidSemantic});
  }

  if (peer.timer_armed() && outbox_has_room)
    acts.push_back({ActionType::InitiateError});

  return acts;
}

namespace {

ApplyResult deliver(const PeerMachine& peer, const Message& m,
                    Validity reply_validity, bool reply_err,
                    unsigned max_htlcs) {
  PeerMachine next = peer;

  // Abort: channel failure, announced with an ERR when the peer chose the
  // announcing variant. Error messages themselves are never answered.
  auto abort = [&]() -> ApplyResult {
    if (reply_err && !is_error_kind(m.kind))
      return {failed(next), Message{MessageType::Err, Validity::Valid, 0}};
    return {failed(next), std::nullopt};
  };

  // Error messages end the channel from any state.
  if (is_error_kind(m.kind)) return {failed(next), std::nullopt};

  switch (m.kind) {
    case MessageType::Add: {
      bool in_add_phase = peer.state == FsmState::Funded ||
                          peer.state == FsmState::MoreHtlcsWait;
      if (!in_add_phase) return abort();
      if (m.validity == Validity::InvalidSemantic)
        return {next, Message{MessageType::Fail, Validity::Valid, m.htlc_id}};
      if (m.validity == Validity::InvalidMalformed)
        return {next, Message{MessageType::Failm, Validity::Valid, m.htlc_id}};
      if (!under_htlc_limit(peer, max_htlcs))
        return {next, Message{MessageType::Fail, Validity::Valid, m.htlc_id}};
      next.remote_htlcs += 1;
      next.state = FsmState::MoreHtlcsWait;
      return {next, std::nullopt};
    }

    case MessageType::Comm: {
      if (m.validity != Validity::Valid) return abort();
      if (peer.state == FsmState::MoreHtlcsWait) {
        next.state = FsmState::WaitFulfillment;
        return {next, Message{MessageType::Rev, reply_validity, 0}};
      }
      if (peer.state == FsmState::WaitCommitmentSig2) {
        next.state = FsmState::Funded;
        return {next, Message{MessageType::Rev, reply_validity, 0}};
      }
      return abort();
    }

    case MessageType::Rev: {
      if (m.validity != Validity::Valid) return abort();
      if (peer.state == FsmState::WaitRevocation) {
        next.state = FsmState::WaitFulfillment;
        return {next, std::nullopt};
      }
      if (peer.state == FsmState::WaitRevocation2) {
        next.state = FsmState::Funded;
        return {next, std::nullopt};
      }
      return abort();
    }

    case MessageType::Fulf: {
      if (peer.state != FsmState::WaitFulfillment ||
          m.validity != Validity::Valid || peer.local_htlcs == 0 ||
          m.htlc_id != peer.local_htlcs - 1u)
        return abort();
      next.local_htlcs -= 1;
      next.state = next.open_htlcs() > 0 ? FsmState::WaitFulfillment
                                         : FsmState::WaitCommitmentSig2;
      return {next, std::nullopt};
    }

    default:
      return abort();
  }
}

}  // namespace

ApplyResult apply(const PeerMachine& peer, const Action& action,
                  unsigned max_htlcs) {
  PeerMachine next = peer;

  switch (action.type) {
    case ActionType::Deliver:
      if (peer.state == FsmState::FailChannel)
        throw IllegalAction("deliver in FAIL_CHANNEL");
      return deliver(peer, action.msg, action.emit, action.reply_err,
                     max_htlcs);

    case ActionType::Timeout:
      if (!peer.timer_armed()) throw IllegalAction("timeout without timer");
      return {failed(next), std::nullopt};

    case ActionType::InitiateAdd: {
      bool may_add = peer.state == FsmState::Funded ||
                     peer.state == FsmState::MoreHtlcsWait;
      if (!may_add || !under_htlc_limit(peer, max_htlcs))
        throw IllegalAction("add not enabled");
      Message out{MessageType::Add, action.emit, peer.local_htlcs};
      next.local_htlcs += 1;
      next.state = FsmState::MoreHtlcsWait;
      return {next, out};
    }

    case ActionType::InitiateCommit: {
      if (peer.state == FsmState::MoreHtlcsWait) {
        next.state = FsmState::WaitRevocation;
      } else if (peer.state == FsmState::WaitCommitmentSig) {
        next.state = FsmState::WaitRevocation2;
      } else {
        throw IllegalAction("commit not enabled");
      }
      return {next, Message{MessageType::Comm, action.emit, 0}};
    }

    case ActionType::InitiateFulfill: {
      if (peer.state != FsmState::WaitFulfillment || peer.remote_htlcs == 0)
        throw IllegalAction("fulfill not enabled");
      Message out{MessageType::Fulf, action.emit,
                  static_cast<std::uint16_t>(peer.remote_htlcs - 1)};
      next.remote_htlcs -= 1;
      next.state = next.open_htlcs() > 0 ? FsmState::WaitFulfillment
                                         : FsmState::WaitCommitmentSig;
      return {next, out};
    }

    case ActionType::InitiateError:
      if (!peer.timer_armed()) throw IllegalAction("error not enabled");
      return {failed(next), Message{MessageType::Err, Validity::Valid, 0}};
  }
  throw IllegalAction("unknown action");
}

const std::array<TransitionTriple, kTransitionCount>& transition_table() {
  using S = FsmState;
  using C = TransitionClass;
  static const std::array<TransitionTriple, kTransitionCount> table{{
      // Payment flow.
      {S::Funded, C::Add, S::MoreHtlcsWait},          // open the first HTLC
      {S::Funded, C::Add, S::Funded},                 // rejected ADD (FAIL/FAILM)
      {S::MoreHtlcsWait, C::Add, S::MoreHtlcsWait},   // further HTLCs / rejects
      {S::MoreHtlcsWait, C::Commit, S::WaitRevocation},     // send COMM
      {S::MoreHtlcsWait, C::Commit, S::WaitFulfillment},    // receive COMM, answer REV
      {S::WaitRevocation, C::Revoke, S::WaitFulfillment},   // COMM acknowledged
      {S::WaitFulfillment, C::Fulfill, S::WaitFulfillment}, // resolve one of several
      {S::WaitFulfillment, C::Fulfill, S::WaitCommitmentSig},   // sent last FULF
      {S::WaitFulfillment, C::Fulfill, S::WaitCommitmentSig2},  // received last FULF
      {S::WaitCommitmentSig, C::Commit, S::WaitRevocation2},    // second COMM
      {S::WaitCommitmentSig2, C::Commit, S::Funded},  // receive second COMM, answer REV
      {S::WaitRevocation2, C::Revoke, S::Funded},     // final REV, payment done
      // Channel failure from every state.
      {S::Funded, C::Abort, S::FailChannel},
      {S::MoreHtlcsWait, C::Abort, S::FailChannel},
      {S::WaitCommitmentSig, C::Abort, S::FailChannel},
      {S::WaitRevocation, C::Abort, S::FailChannel},
      {S::WaitFulfillment, C::Abort, S::FailChannel},
      {S::WaitCommitmentSig2, C::Abort, S::FailChannel},
      {S::WaitRevocation2, C::Abort, S::FailChannel},
  }};
  return table;
}

TransitionClass classify_transition(FsmState /*source*/, const Action& action,
                                    FsmState target) {
  if (target == FsmState::FailChannel) return TransitionClass::Abort;
  switch (action.type) {
    case ActionType::InitiateAdd:
      return TransitionClass::Add;
    case ActionType::InitiateCommit:
      return TransitionClass::Commit;
    case ActionType::InitiateFulfill:
      return TransitionClass::Fulfill;
    case ActionType::Deliver:
      switch (action.msg.kind) {
        case MessageType::Add:
          return TransitionClass::Add;
        case MessageType::Comm:
          return TransitionClass::Commit;
        case MessageType::Rev:
          return TransitionClass::Revoke;
        case MessageType::Fulf:
          return TransitionClass::Fulfill;
        default:
          break;
      }
      return TransitionClass::Abort;
    default:
      return TransitionClass::Abort;
  }
}

std::string_view to_string(FsmState s) {
  switch (s) {
    case FsmState::Funded: return "FUNDED";
    case FsmState::MoreHtlcsWait: return "MORE_HTLCS_WAIT";
    case FsmState::WaitCommitmentSig: return "WAIT_COMMITMENT_SIG";
    case FsmState::WaitRevocation: return "WAIT_REVOCATION";
    case FsmState::WaitFulfillment: return "WAIT_FULFILLMENT";
    case FsmState::WaitCommitmentSig2: return "WAIT_COMMITMENT_SIG_2";
    case FsmState::WaitRevocation2: return "WAIT_REVOCATION_2";
    case FsmState::FailChannel: return "FAIL_CHANNEL";
  }
  return "?";
}

std::string_view to_string(MessageType k) {
  switch (k) {
    case MessageType::Add: return "ADD";
    case MessageType::Comm: return "COMM";
    case MessageType::Rev: return "REV";
    case MessageType::Fulf: return "FULF";
    case MessageType::Err: return "ERR";
    case MessageType::Fail: return "FAIL";
    case MessageType::Failm: return "FAILM";
  }
  return "?";
}

std::string_view to_string(Validity v) {
  switch (v) {
    case Validity::Valid: return "valid";
    case Validity::InvalidSemantic: return "invalid";
    case Validity::InvalidMalformed: return "malformed";
  }
  return "?";
}

std::string_view to_string(Role r) { return r == Role::A ? "A" : "B"; }

std::string_view to_string(ActionType t) {
  switch (t) {
    case ActionType::Deliver: return "deliver";
    case ActionType::Timeout: return "timeout";
    case ActionType::InitiateAdd: return "initiate_add";
    case ActionType::InitiateCommit: return "initiate_commit";
    case ActionType::InitiateFulfill: return "initiate_fulfill";
    case ActionType::InitiateError: return "initiate_error";
  }
  return "?";
}

std::string_view to_string(TransitionClass c) {
  switch (c) {
    case TransitionClass::Add: return "add";
    case TransitionClass::Commit: return "commit";
    case TransitionClass::Revoke: return "revoke";
    case TransitionClass::Fulfill: return "fulfill";
    case TransitionClass::Abort: return "abort";
  }
  return "?";
}

std::string_view timer_tag(FsmState s) {
  switch (s) {
    case FsmState::MoreHtlcsWait: return "MORE_HTLCS_WAIT_T";
    case FsmState::WaitCommitmentSig: return "WAIT_COMMITMENT_SIG_T";
    case FsmState::WaitRevocation: return "WAIT_REVOCATION_T";
    case FsmState::WaitFulfillment: return "WAIT_FULFILLMENT_T";
    case FsmState::WaitCommitmentSig2: return "WAIT_COMMITMENT_SIG_2_T";
    case FsmState::WaitRevocation2: return "WAIT_REVOCATION_2_T";
    default: return "";
  }
}

std::optional<FsmState> fsm_state_from(std::string_view name) {
  for (std::size_t i = 0; i < kFsmStateCount; ++i) {
    auto s = static_cast<FsmState>(i);
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::optional<MessageType> message_type_from(std::string_view name) {
  for (std::size_t i = 0; i < kMessageTypeCount; ++i) {
    auto k = static_cast<MessageType>(i);
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<Validity> validity_from(std::string_view name) {
  for (auto v : {Validity::Valid, Validity::InvalidSemantic,
                 Validity::InvalidMalformed}) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

}  // namespace lnmc
