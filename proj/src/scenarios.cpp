#include "lnmc/scenarios.hpp"

#include <stdexcept>

namespace lnmc {

namespace {

// Extends the trace by one event, validating it against the model.
void step(Trace& trace, GlobalState& cur, const ModelConfig& cfg, Role actor,
          Action action) {
  const PeerMachine& peer = cur.peer(actor);
  ApplyResult res = apply(peer, action, cfg.max_htlcs);
  Event ev{actor, action, res.emitted};
  GlobalState next = apply_event(cur, ev, cfg);
  trace.steps.push_back({cur, ev});
  cur = next;
}

Message head_of(const GlobalState& g, Role to) {
  auto head = g.link.inbound(to).head();
  if (!head) throw std::logic_error("scripted delivery with empty buffer");
  return *head;
}

}  // namespace

Trace honest_payment_trace(const ModelConfig& cfg) {
  Trace trace;
  GlobalState cur = initial_state(cfg);

  // A opens the HTLC and commits; B revokes in response.
  step(trace, cur, cfg, Role::A, {ActionType::InitiateAdd, {}, Validity::Valid});
  step(trace, cur, cfg, Role::B, {ActionType::Deliver, head_of(cur, Role::B)});
  step(trace, cur, cfg, Role::A, {ActionType::InitiateCommit, {}, Validity::Valid});
  step(trace, cur, cfg, Role::B,
       {ActionType::Deliver, head_of(cur, Role::B), Validity::Valid});
  step(trace, cur, cfg, Role::A, {ActionType::Deliver, head_of(cur, Role::A)});

  // B fulfills, commits the resolved state; A revokes; B completes.
  step(trace, cur, cfg, Role::B,
       {ActionType::InitiateFulfill, {}, Validity::Valid});
  step(trace, cur, cfg, Role::A, {ActionType::Deliver, head_of(cur, Role::A)});
  step(trace, cur, cfg, Role::B, {ActionType::InitiateCommit, {}, Validity::Valid});
  step(trace, cur, cfg, Role::A,
       {ActionType::Deliver, head_of(cur, Role::A), Validity::Valid});
  step(trace, cur, cfg, Role::B, {ActionType::Deliver, head_of(cur, Role::B)});

  trace.final_state = cur;
  return trace;
}

Trace payout_race_trace(const ModelConfig& cfg) {
  auto violation = find_safety_violation(cfg, build(PropertyId::P3));
  if (!violation)
    throw std::logic_error("strict determinacy violation not found");
  return *violation;
}

Trace congestion_trace(const ModelConfig& cfg) {
  auto violation = find_safety_violation(cfg, build(PropertyId::P4));
  if (!violation) throw std::logic_error("congestion violation not found");
  return *violation;
}

}  // namespace lnmc
