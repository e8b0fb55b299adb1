#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lnmc/explorer.hpp"

namespace lnmc {

using Amount = std::int64_t;

struct SettlementParams {
  Amount funding = 100;
  Amount base_a = 60;       // channel balance before the payment
  Amount base_b = 40;
  Amount htlc_amount = 10;  // every HTLC carries this amount
};

class DoubleSpend : public std::runtime_error {
 public:
  explicit DoubleSpend(const std::string& what) : std::runtime_error(what) {}
};
class Immature : public std::runtime_error {
 public:
  explicit Immature(const std::string& what) : std::runtime_error(what) {}
};
class ConditionUnsatisfied : public std::runtime_error {
 public:
  explicit ConditionUnsatisfied(const std::string& what)
      : std::runtime_error(what) {}
};
class MalformedTrace : public std::runtime_error {
 public:
  explicit MalformedTrace(const std::string& what)
      : std::runtime_error(what) {}
};
class ScenarioInapplicable : public std::runtime_error {
 public:
  explicit ScenarioInapplicable(const std::string& what)
      : std::runtime_error(what) {}
};

// Spend conditions as capability checks. Cryptography is reduced to token
// possession: the threat model rules out forging, so holding the token is
// the whole semantics.
struct TwoOfTwo {};          // funding output; satisfied by a held commitment
struct Simple {              // immediately spendable by its owner
  Role owner;
};
struct ToSelfDelayed {       // publisher's own output: CSV delay, penalty path
  Role owner;
  unsigned csv_delay;
  std::string revocation_of;  // commitment label; "" = no penalty path
};
struct HtlcSpend {           // preimage path for the payee, refund for payer
  Role payee;
  Role payer;
  unsigned csv_delay;          // publisher-side delay before the success sweep
  std::uint64_t cltv_height;   // absolute height unlocking the refund path
  Role adder;
  std::uint16_t htlc_id;
};
using SpendCondition = std::variant<TwoOfTwo, Simple, ToSelfDelayed, HtlcSpend>;

struct Output {
  Amount amount{0};
  SpendCondition condition{Simple{Role::A}};
};

struct OutputRef {
  std::string tx;
  unsigned index{0};

  friend auto operator<=>(const OutputRef&, const OutputRef&) = default;
};

struct HtlcInfo {
  Role adder;
  std::uint16_t id{0};
  Amount amount{0};

  friend bool operator==(const HtlcInfo&, const HtlcInfo&) = default;
};

// One signed channel-closing transaction a peer holds. The label subscript
// names the signer; the holder is the peer that can publish it. All live
// commitments spend the same funding output.
struct Commitment {
  std::string label;
  Role signer{Role::A};
  Role holder{Role::B};
  bool revoked{false};
  Amount balance_a{0};
  Amount balance_b{0};
  std::vector<HtlcInfo> htlcs;
};

struct TxInput {
  OutputRef ref;
  Role spender{Role::A};
  bool both_signatures{false};          // satisfies TwoOfTwo
  std::optional<std::string> revocation;  // revocation token (commitment label)
  bool preimage{false};                 // preimage token for the cited HTLC
};

struct Tx {
  std::string label;
  std::vector<TxInput> inputs;
  std::vector<Output> outputs;
  std::uint64_t maturity{0};  // earliest height at which it may confirm
};

struct ConfirmedOutput {
  Output output;
  std::uint64_t conf_height{0};
};

struct Ledger {
  std::uint64_t height{0};
  std::map<OutputRef, ConfirmedOutput> utxos;
  std::vector<Tx> confirmed;
};

// Fresh ledger holding only the 2-of-2 funding output.
Ledger make_ledger(const SettlementParams&);

Ledger mine_blocks(Ledger ledger, std::uint64_t n);

// Validates inputs (unspent, mature, conditions satisfied at the current
// height) and appends the transaction at the current height. Several
// transactions may confirm at the same height.
Ledger confirm(Ledger ledger, const Tx& tx);

// Everything derive_commitments reconstructs from a protocol trace: the
// commitments each peer holds, which are revoked, and the capability tokens
// each party ended up with.
struct DerivedChannel {
  std::vector<Commitment> commitments;
  std::map<std::string, Role> revocation_tokens;  // label -> penalizing party
  std::map<std::pair<int, std::uint16_t>, Role> preimages;  // (adder,id) -> holder
  Amount view_balance_a{0};  // A's view of the channel balance after replay
  Amount view_balance_b{0};

  const Commitment* find(const std::string& label) const;
};

// Replays a protocol trace and derives the commitment picture: every
// delivered COMM becomes a commitment held by its receiver (a delivered
// commitment is spendable whether or not the receiver then continued the
// protocol); every REV a holder sent revokes its previous commitment.
DerivedChannel derive_commitments(const Trace&, const SettlementParams&,
                                  const ModelConfig&);

Tx build_commitment_tx(const Commitment&, const SettlementParams&,
                       const ModelConfig&);

// Spends every remaining output of a published revoked commitment to the
// penalizing party, claiming the full channel value.
Tx build_penalty_tx(const Ledger&, const Commitment&, Role penalizer);

enum class Scenario {
  Outcome1,        // honest Bob, malicious Alice: stale force close wins
  Outcome2,        // honest Alice, malicious Bob: HTLC swept via preimage
  HonestComplete,  // payment completed, channel closed at the new balance
  HonestAbort,     // payment abandoned, HTLC refunded after the timeout
};

struct PayoutSummary {
  std::string scenario;
  Amount balance_a{0};
  Amount balance_b{0};
  Amount funding{0};
  std::string confirmed_commitment;
  std::optional<std::string> rejected_double_spend;
  std::uint64_t blocks_elapsed{0};
  std::uint32_t open_htlcs{0};
  std::vector<std::string> timeline;
};

// Drives the ledger through the scripted scenario from the given protocol
// trace and returns final balances per party.
PayoutSummary resolve_outcome(const Trace&, Scenario, const SettlementParams&,
                              const ModelConfig&);

// Settlement of a congested channel: no commitment was ever delivered, so
// the initial commitments are the only close; reports the open HTLC count.
PayoutSummary settle_congestion(const Trace&, const SettlementParams&,
                                const ModelConfig&);

// The Fig-7 style pipeline length: force-close confirmation, csv_delay
// maturity, success-sweep confirmation, second csv_delay, final sweep.
constexpr std::uint64_t payout_race_completion_blocks(unsigned csv_delay) {
  return 2ull * csv_delay + 3;
}

std::string_view to_string(Scenario);
std::optional<Scenario> scenario_from(std::string_view name);

}  // namespace lnmc
