#include "lnmc/settlement.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace lnmc {

namespace {

constexpr const char* kFundingTx = "funding";

Amount& balance_of(Amount& a, Amount& b, Role r) { return r == Role::A ? a : b; }

std::string role_suffix(Role r) { return std::string("_") + std::string(to_string(r)); }

// Initial commitments are C2_X; each newer one signed by X gains a prime.
std::string generation_label(Role signer, unsigned generation) {
  if (generation == 0) return "C2" + role_suffix(signer);
  std::string label = "C1";
  for (unsigned i = 0; i < generation; ++i) label += "'";
  return label + role_suffix(signer);
}

void check_condition(const Ledger& ledger, const ConfirmedOutput& co,
                     const TxInput& input, const std::string& tx_label) {
  const SpendCondition& cond = co.output.condition;

  if (std::holds_alternative<TwoOfTwo>(cond)) {
    if (!input.both_signatures)
      throw ConditionUnsatisfied(tx_label + ": funding output needs 2-of-2");
    return;
  }
  if (const auto* s = std::get_if<Simple>(&cond)) {
    if (input.spender != s->owner)
      throw ConditionUnsatisfied(tx_label + ": output not owned by spender");
    return;
  }
  if (const auto* d = std::get_if<ToSelfDelayed>(&cond)) {
    if (input.spender == d->owner) {
      if (ledger.height < co.conf_height + d->csv_delay)
        throw Immature(tx_label + ": csv delay not elapsed");
      return;
    }
    if (d->revocation_of.empty() || input.revocation != d->revocation_of)
      throw ConditionUnsatisfied(tx_label + ": revocation token required");
    return;
  }
  const auto& h = std::get<HtlcSpend>(cond);
  if (input.spender == h.payee) {
    if (!input.preimage)
      throw ConditionUnsatisfied(tx_label + ": preimage token required");
    if (ledger.height < co.conf_height + h.csv_delay)
      throw Immature(tx_label + ": csv delay not elapsed");
    return;
  }
  if (input.spender == h.payer) {
    if (ledger.height < h.cltv_height)
      throw Immature(tx_label + ": cltv timeout not reached");
    return;
  }
  throw ConditionUnsatisfied(tx_label + ": no spend path for this party");
}

}  // namespace

Ledger make_ledger(const SettlementParams& params) {
  Ledger ledger;
  ledger.utxos[{kFundingTx, 0}] = {Output{params.funding, TwoOfTwo{}}, 0};
  return ledger;
}

Ledger mine_blocks(Ledger ledger, std::uint64_t n) {
  ledger.height += n;
  return ledger;
}

Ledger confirm(Ledger ledger, const Tx& tx) {
  if (ledger.height < tx.maturity)
    throw Immature(tx.label + ": below its maturity height");

  Amount in_total = 0;
  for (const TxInput& input : tx.inputs) {
    auto it = ledger.utxos.find(input.ref);
    if (it == ledger.utxos.end())
      throw DoubleSpend(tx.label + ": input " + input.ref.tx + "[" +
                        std::to_string(input.ref.index) + "] already spent");
    check_condition(ledger, it->second, input, tx.label);
    in_total += it->second.output.amount;
  }
  Amount out_total = std::accumulate(
      tx.outputs.begin(), tx.outputs.end(), Amount{0},
      [](Amount acc, const Output& o) { return acc + o.amount; });
  if (in_total != out_total)
    throw ConditionUnsatisfied(tx.label + ": outputs do not match inputs");

  for (const TxInput& input : tx.inputs) ledger.utxos.erase(input.ref);
  for (unsigned i = 0; i < tx.outputs.size(); ++i)
    ledger.utxos[{tx.label, i}] = {tx.outputs[i], ledger.height};
  ledger.confirmed.push_back(tx);
  return ledger;
}

const Commitment* DerivedChannel::find(const std::string& label) const {
  for (const Commitment& c : commitments)
    if (c.label == label) return &c;
  return nullptr;
}

DerivedChannel derive_commitments(const Trace& trace,
                                  const SettlementParams& params,
                                  const ModelConfig& cfg) {
  if (!replay_trace(trace, cfg))
    throw MalformedTrace("trace does not replay from the initial state");

  DerivedChannel ch;

  struct View {
    Amount balance_a, balance_b;
    std::vector<HtlcInfo> open;
  };
  View view[2] = {{params.base_a, params.base_b, {}},
                  {params.base_a, params.base_b, {}}};
  std::vector<std::size_t> held[2];
  unsigned generation[2] = {0, 0};  // post-initial commitments per signer

  auto add_initial = [&](Role signer) {
    Commitment c;
    c.label = generation_label(signer, 0);
    c.signer = signer;
    c.holder = other(signer);
    c.balance_a = params.base_a;
    c.balance_b = params.base_b;
    held[static_cast<int>(c.holder)].push_back(ch.commitments.size());
    ch.commitments.push_back(c);
  };
  add_initial(Role::A);
  add_initial(Role::B);

  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const Event& ev = trace.steps[i].event;
    const GlobalState& pre = trace.steps[i].state;
    const GlobalState& post =
        i + 1 < trace.steps.size() ? trace.steps[i + 1].state : trace.final_state;

    Role actor = ev.actor;
    Role peer = other(actor);
    int ai = static_cast<int>(actor);
    View& v = view[ai];

    // The delivery precedes the emission within one atomic action; a REV
    // emitted in the same step therefore revokes the pre-existing
    // commitment, not the one just gained.
    if (ev.action.type == ActionType::Deliver) {
      const Message& m = ev.action.msg;
      const PeerMachine& before = pre.peer(actor);
      const PeerMachine& after = post.peer(actor);

      switch (m.kind) {
        case MessageType::Add:
          if (after.remote_htlcs == before.remote_htlcs + 1) {
            // The adder's balance moves into the HTLC output.
            v.open.push_back({peer, m.htlc_id, params.htlc_amount});
            balance_of(v.balance_a, v.balance_b, peer) -= params.htlc_amount;
            // The payee issued the invoice; it holds the preimage.
            ch.preimages[{static_cast<int>(peer), m.htlc_id}] = actor;
          }
          break;
        case MessageType::Comm: {
          Commitment c;
          c.signer = peer;
          c.holder = actor;
          c.label = generation_label(peer, ++generation[static_cast<int>(peer)]);
          c.balance_a = v.balance_a;
          c.balance_b = v.balance_b;
          c.htlcs = v.open;
          held[ai].push_back(ch.commitments.size());
          ch.commitments.push_back(c);
          break;
        }
        case MessageType::Fulf:
          if (after.local_htlcs + 1 == before.local_htlcs) {
            auto it = std::find_if(v.open.begin(), v.open.end(),
                                   [&](const HtlcInfo& h) {
                                     return h.adder == actor && h.id == m.htlc_id;
                                   });
            if (it == v.open.end())
              throw MalformedTrace("fulfilled HTLC not open in receiver view");
            Amount amt = it->amount;
            v.open.erase(it);
            balance_of(v.balance_a, v.balance_b, peer) += amt;
          }
          break;
        default:
          break;
      }
    }

    if (ev.emitted) {
      const Message& m = *ev.emitted;
      switch (m.kind) {
        case MessageType::Add:
          v.open.push_back({actor, m.htlc_id, params.htlc_amount});
          balance_of(v.balance_a, v.balance_b, actor) -= params.htlc_amount;
          ch.preimages[{ai, m.htlc_id}] = peer;
          break;
        case MessageType::Fulf: {
          auto it = std::find_if(v.open.begin(), v.open.end(),
                                 [&](const HtlcInfo& h) {
                                   return h.adder == peer && h.id == m.htlc_id;
                                 });
          if (it == v.open.end())
            throw MalformedTrace("fulfilled HTLC not open in sender view");
          Amount amt = it->amount;
          v.open.erase(it);
          balance_of(v.balance_a, v.balance_b, actor) += amt;
          break;
        }
        case MessageType::Rev: {
          auto& h = held[ai];
          if (h.size() < 2)
            throw MalformedTrace("REV sent without a superseded commitment");
          Commitment& prev = ch.commitments[h[h.size() - 2]];
          prev.revoked = true;
          ch.revocation_tokens[prev.label] = peer;
          break;
        }
        default:
          break;
      }
    }
  }

  ch.view_balance_a = view[0].balance_a;
  ch.view_balance_b = view[0].balance_b;
  return ch;
}

Tx build_commitment_tx(const Commitment& c, const SettlementParams& /*params*/,
                       const ModelConfig& cfg) {
  Tx tx;
  tx.label = c.label;
  tx.inputs.push_back({{kFundingTx, 0}, c.holder, true, std::nullopt, false});

  Amount holder_bal = c.holder == Role::A ? c.balance_a : c.balance_b;
  Amount peer_bal = c.holder == Role::A ? c.balance_b : c.balance_a;
  if (holder_bal > 0)
    tx.outputs.push_back(
        {holder_bal, ToSelfDelayed{c.holder, cfg.csv_delay, c.label}});
  if (peer_bal > 0) tx.outputs.push_back({peer_bal, Simple{other(c.holder)}});
  for (const HtlcInfo& h : c.htlcs)
    tx.outputs.push_back(
        {h.amount, HtlcSpend{other(h.adder), h.adder, cfg.csv_delay,
                             cfg.cltv_expiry, h.adder, h.id}});
  return tx;
}

Tx build_penalty_tx(const Ledger& ledger, const Commitment& c, Role penalizer) {
  Tx tx;
  tx.label = "penalty_" + c.label;
  Amount total = 0;
  for (const auto& [ref, co] : ledger.utxos) {
    if (ref.tx != c.label) continue;
    TxInput input{ref, penalizer, false, std::nullopt, false};
    if (std::holds_alternative<ToSelfDelayed>(co.output.condition))
      input.revocation = c.label;
    if (const auto* h = std::get_if<HtlcSpend>(&co.output.condition)) {
      if (h->payee == penalizer) input.preimage = true;
    }
    tx.inputs.push_back(input);
    total += co.output.amount;
  }
  tx.outputs.push_back({total, Simple{penalizer}});
  return tx;
}

namespace {

struct Script {
  Ledger ledger;
  PayoutSummary sum;

  void log(const std::string& text) {
    sum.timeline.push_back("height " + std::to_string(ledger.height) + ": " +
                           text);
  }

  // Every confirmation consumes exactly one block.
  void confirm_next_block(const Tx& tx, const std::string& text) {
    ledger = mine_blocks(std::move(ledger), 1);
    ledger = confirm(std::move(ledger), tx);
    log(text);
  }

  void wait_blocks(std::uint64_t n, const std::string& text) {
    ledger = mine_blocks(std::move(ledger), n);
    log(text);
  }

  // Sum the immediately-owned outputs; scripts sweep everything else first.
  void finish() {
    for (const auto& [ref, co] : ledger.utxos) {
      const auto* s = std::get_if<Simple>(&co.output.condition);
      if (s == nullptr)
        throw std::logic_error("scenario left a non-simple output unswept: " +
                               ref.tx);
      balance_of(sum.balance_a, sum.balance_b, s->owner) += co.output.amount;
    }
    sum.blocks_elapsed = ledger.height;
  }
};

OutputRef find_output(const Tx& tx, const std::function<bool(const Output&)>& pred,
                      Amount* amount = nullptr) {
  for (unsigned i = 0; i < tx.outputs.size(); ++i) {
    if (pred(tx.outputs[i])) {
      if (amount) *amount = tx.outputs[i].amount;
      return {tx.label, i};
    }
  }
  throw std::logic_error("expected output not present in " + tx.label);
}

Tx make_balance_sweep(const Tx& close, Role owner) {
  Amount amt = 0;
  OutputRef ref = find_output(close, [&](const Output& o) {
    const auto* d = std::get_if<ToSelfDelayed>(&o.condition);
    return d != nullptr && d->owner == owner;
  }, &amt);
  Tx tx;
  tx.label = "sweep_balance_" + std::string(to_string(owner));
  tx.inputs.push_back({ref, owner, false, std::nullopt, false});
  tx.outputs.push_back({amt, Simple{owner}});
  return tx;
}

Tx make_htlc_success(const Tx& close, Role payee, unsigned csv_delay) {
  Amount amt = 0;
  OutputRef ref = find_output(close, [](const Output& o) {
    return std::holds_alternative<HtlcSpend>(o.condition);
  }, &amt);
  Tx tx;
  tx.label = "htlc_success";
  tx.inputs.push_back({ref, payee, false, std::nullopt, true});
  // The success transaction parks the funds behind a second delay.
  tx.outputs.push_back({amt, ToSelfDelayed{payee, csv_delay, ""}});
  return tx;
}

Tx make_htlc_refund(const Tx& close, Role payer) {
  Amount amt = 0;
  OutputRef ref = find_output(close, [](const Output& o) {
    return std::holds_alternative<HtlcSpend>(o.condition);
  }, &amt);
  Tx tx;
  tx.label = "htlc_refund";
  tx.inputs.push_back({ref, payer, false, std::nullopt, false});
  tx.outputs.push_back({amt, Simple{payer}});
  return tx;
}

Tx make_second_sweep(const Tx& success, Role owner) {
  Tx tx;
  tx.label = "sweep_htlc";
  tx.inputs.push_back({{success.label, 0}, owner, false, std::nullopt, false});
  tx.outputs.push_back({success.outputs[0].amount, Simple{owner}});
  return tx;
}

// Latest unrevoked commitment held by `holder`, optionally requiring or
// excluding HTLC outputs.
const Commitment* newest_unrevoked(const DerivedChannel& ch, Role holder,
                                   bool with_htlcs) {
  const Commitment* found = nullptr;
  for (const Commitment& c : ch.commitments) {
    if (c.holder != holder || c.revoked) continue;
    if (with_htlcs != !c.htlcs.empty()) continue;
    found = &c;  // commitments are stored in creation order
  }
  return found;
}

}  // namespace

PayoutSummary resolve_outcome(const Trace& trace, Scenario sc,
                              const SettlementParams& params,
                              const ModelConfig& cfg) {
  DerivedChannel ch = derive_commitments(trace, params, cfg);
  Script s;
  s.ledger = make_ledger(params);
  s.sum.scenario = std::string(to_string(sc));
  s.sum.funding = params.funding;

  switch (sc) {
    case Scenario::Outcome1: {
      const Commitment* stale = ch.find("C2_B");
      const Commitment* fresh = ch.find("C1'_A");
      if (stale == nullptr || stale->revoked || fresh == nullptr)
        throw ScenarioInapplicable(
            "outcome1 needs an unrevoked C2_B next to C1'_A");
      Tx close = build_commitment_tx(*stale, params, cfg);
      s.log("A submits the stale force close " + stale->label);
      s.confirm_next_block(close, stale->label + " confirmed");
      s.sum.confirmed_commitment = stale->label;

      Tx competing = build_commitment_tx(*fresh, params, cfg);
      try {
        s.ledger = confirm(s.ledger, competing);
        throw std::logic_error("competing commitment unexpectedly confirmed");
      } catch (const DoubleSpend&) {
        s.sum.rejected_double_spend = fresh->label;
        s.log(fresh->label + " rejected: funding output already spent");
      }

      s.wait_blocks(cfg.csv_delay, "csv delay elapsed");
      s.confirm_next_block(make_balance_sweep(close, Role::A),
                           "A sweeps the delayed balance output");
      s.finish();
      return s.sum;
    }

    case Scenario::Outcome2: {
      const Commitment* fresh = ch.find("C1'_A");
      if (fresh == nullptr || fresh->revoked || fresh->htlcs.empty())
        throw ScenarioInapplicable(
            "outcome2 needs an unrevoked C1'_A carrying the HTLC");
      const HtlcInfo& htlc = fresh->htlcs.front();
      auto pre = ch.preimages.find({static_cast<int>(htlc.adder), htlc.id});
      if (pre == ch.preimages.end() || pre->second != fresh->holder)
        throw ScenarioInapplicable("holder lacks the HTLC preimage");

      Tx close = build_commitment_tx(*fresh, params, cfg);
      s.log("B submits the force close " + fresh->label);
      s.confirm_next_block(close, fresh->label + " confirmed");
      s.sum.confirmed_commitment = fresh->label;

      s.wait_blocks(cfg.csv_delay, "force close matured");
      Tx success = make_htlc_success(close, fresh->holder, cfg.csv_delay);
      s.ledger = mine_blocks(std::move(s.ledger), 1);
      s.ledger = confirm(std::move(s.ledger), success);
      s.ledger = confirm(std::move(s.ledger),
                         make_balance_sweep(close, fresh->holder));
      s.log("HTLC-success sweep and balance sweep confirmed");

      s.wait_blocks(cfg.csv_delay, "HTLC-success transaction matured");
      s.confirm_next_block(make_second_sweep(success, fresh->holder),
                           "second sweep confirmed; HTLC funds in B's wallet");
      s.finish();
      return s.sum;
    }

    case Scenario::HonestComplete: {
      const Commitment* latest = newest_unrevoked(ch, Role::A, false);
      if (latest == nullptr)
        throw ScenarioInapplicable(
            "honest completion needs an unrevoked HTLC-free commitment");
      Tx close = build_commitment_tx(*latest, params, cfg);
      s.log("A submits the cooperative force close " + latest->label);
      s.confirm_next_block(close, latest->label + " confirmed");
      s.sum.confirmed_commitment = latest->label;
      s.wait_blocks(cfg.csv_delay, "csv delay elapsed");
      s.confirm_next_block(make_balance_sweep(close, Role::A),
                           "A sweeps the delayed balance output");
      s.finish();
      return s.sum;
    }

    case Scenario::HonestAbort: {
      const Commitment* pending = newest_unrevoked(ch, Role::B, true);
      if (pending == nullptr)
        throw ScenarioInapplicable(
            "honest abort needs a commitment with an open HTLC");
      Tx close = build_commitment_tx(*pending, params, cfg);
      s.log("B submits the force close " + pending->label);
      s.confirm_next_block(close, pending->label + " confirmed");
      s.sum.confirmed_commitment = pending->label;

      // B leaves the HTLC alone; the refund unlocks at the cltv timeout,
      // which has long passed once the csv delay has run out.
      s.wait_blocks(cfg.csv_delay, "csv delay elapsed; cltv timeout passed");
      s.ledger = mine_blocks(std::move(s.ledger), 1);
      s.ledger = confirm(std::move(s.ledger),
                         make_balance_sweep(close, pending->holder));
      s.ledger =
          confirm(std::move(s.ledger),
                  make_htlc_refund(close, other(pending->holder)));
      s.log("balance sweep and HTLC refund confirmed");
      s.finish();
      return s.sum;
    }
  }
  throw std::logic_error("unhandled scenario");
}

PayoutSummary settle_congestion(const Trace& trace,
                                const SettlementParams& params,
                                const ModelConfig& cfg) {
  DerivedChannel ch = derive_commitments(trace, params, cfg);
  Script s;
  s.ledger = make_ledger(params);
  s.sum.scenario = "congestion";
  s.sum.funding = params.funding;
  s.sum.open_htlcs = std::max(trace.final_state.peer_a.open_htlcs(),
                              trace.final_state.peer_b.open_htlcs());

  // No commitment was ever delivered: the pending HTLCs are uncommitted and
  // the initial commitments are the only possible close.
  const Commitment* initial = ch.find("C2_B");
  if (initial == nullptr || initial->revoked)
    throw ScenarioInapplicable("congested channel lost its initial commitment");
  Tx close = build_commitment_tx(*initial, params, cfg);
  s.log("channel congested with " + std::to_string(s.sum.open_htlcs) +
        " open HTLCs; A force-closes with " + initial->label);
  s.confirm_next_block(close, initial->label + " confirmed");
  s.sum.confirmed_commitment = initial->label;
  s.wait_blocks(cfg.csv_delay, "csv delay elapsed");
  s.confirm_next_block(make_balance_sweep(close, Role::A),
                       "A sweeps the delayed balance output");
  s.finish();
  return s.sum;
}

std::string_view to_string(Scenario sc) {
  switch (sc) {
    case Scenario::Outcome1: return "payout-race-outcome1";
    case Scenario::Outcome2: return "payout-race-outcome2";
    case Scenario::HonestComplete: return "honest";
    case Scenario::HonestAbort: return "honest-abort";
  }
  return "?";
}

std::optional<Scenario> scenario_from(std::string_view name) {
  for (auto sc : {Scenario::Outcome1, Scenario::Outcome2,
                  Scenario::HonestComplete, Scenario::HonestAbort}) {
    if (to_string(sc) == name) return sc;
  }
  return std::nullopt;
}

}  // namespace lnmc
