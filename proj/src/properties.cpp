#include "lnmc/properties.hpp"

namespace lnmc {

namespace {
constexpr ClaimState kArmed = 1;
}

PropertyChecker build(PropertyId id) {
  switch (id) {
    case PropertyId::P1: return {id, CheckerKind::NeverClaim};
    case PropertyId::P2: return {id, CheckerKind::NeverClaim};
    case PropertyId::P3: return {id, CheckerKind::MustMatchTrace};
    case PropertyId::P4: return {id, CheckerKind::StateInvariant};
    case PropertyId::P5: return {id, CheckerKind::BuchiNegation};
    case PropertyId::Deadlock: return {id, CheckerKind::Builtin};
    case PropertyId::NonProgress: return {id, CheckerKind::Builtin};
  }
  throw std::invalid_argument("unknown property id");
}

ClaimState claim_initial(const PropertyChecker&) { return 0; }

ClaimStep claim_step(const PropertyChecker& checker, ClaimState state,
                     const ObservableEvent& ev) {
  bool armed = (state & kArmed) != 0;
  bool send = ev.dir == Direction::Send;

  switch (checker.id) {
    case PropertyId::P1: {
      // Armed means the previous event of this peer was !REV; a ?COMM in
      // that position means the REV preceded the COMM it answers.
      if (armed && !send && ev.kind == MessageType::Comm)
        return {ClaimVerdict::Violation, state};
      ClaimState next = (send && ev.kind == MessageType::Rev) ? kArmed : 0;
      return {ClaimVerdict::Advance, next};
    }

    case PropertyId::P2: {
      // Armed after ?COMM until the owed !REV; any FULF meanwhile matches
      // the forbidden automaton.
      if (armed && ev.kind == MessageType::Fulf)
        return {ClaimVerdict::Violation, state};
      ClaimState next = state;
      if (!send && ev.kind == MessageType::Comm) next = kArmed;
      if (send && ev.kind == MessageType::Rev) next = 0;
      return {ClaimVerdict::Advance, next};
    }

    case PropertyId::P3: {
      // Armed after ?COMM: the next send must be the REV. Receives are
      // absorbed by the post-COMM self-loop.
      if (armed && send) {
        if (ev.kind == MessageType::Rev) return {ClaimVerdict::Advance, 0};
        return {ClaimVerdict::Violation, state};
      }
      ClaimState next = state;
      if (!send && ev.kind == MessageType::Comm) next = kArmed;
      return {ClaimVerdict::Advance, next};
    }

    default:
      return {ClaimVerdict::Advance, state};
  }
}

ClaimStep claim_channel_failed(const PropertyChecker& checker,
                               ClaimState state) {
  if (checker.id == PropertyId::P3 && (state & kArmed) != 0)
    return {ClaimVerdict::Violation, state};
  return {ClaimVerdict::Advance, state};
}

bool state_invariant_holds(const PropertyChecker& checker,
                           const PeerMachine& peer, unsigned max_htlcs) {
  if (checker.id == PropertyId::P4)
    return peer.open_htlcs() < max_htlcs;
  return true;
}

bool liveness_progress_state(PropertyId id, FsmState s) {
  switch (id) {
    case PropertyId::P5:
      // A run forever cycling through FAIL_CHANNEL still satisfies P5.
      return s == FsmState::Funded || s == FsmState::FailChannel;
    case PropertyId::NonProgress:
      return s == FsmState::Funded;
    default:
      return false;
  }
}

std::string_view to_string(PropertyId id) {
  switch (id) {
    case PropertyId::P1: return "p1";
    case PropertyId::P2: return "p2";
    case PropertyId::P3: return "p3";
    case PropertyId::P4: return "p4";
    case PropertyId::P5: return "p5";
    case PropertyId::Deadlock: return "deadlock";
    case PropertyId::NonProgress: return "nonprogress";
  }
  return "?";
}

std::optional<PropertyId> property_id_from(std::string_view name) {
  for (auto id : {PropertyId::P1, PropertyId::P2, PropertyId::P3,
                  PropertyId::P4, PropertyId::P5, PropertyId::Deadlock,
                  PropertyId::NonProgress}) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

}  // namespace lnmc
