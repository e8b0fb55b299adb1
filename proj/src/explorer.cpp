#include "lnmc/explorer.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <deque>
#include <functional>
#include <unordered_map>

namespace lnmc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

std::uint16_t read_u16(const std::string& in, std::size_t& pos) {
  std::uint16_t lo = static_cast<unsigned char>(in[pos++]);
  std::uint16_t hi = static_cast<unsigned char>(in[pos++]);
  return static_cast<std::uint16_t>(lo | (hi << 8));
}

void append_peer(std::string& out, const PeerMachine& p) {
  out.push_back(static_cast<char>(p.state));
  append_u16(out, p.local_htlcs);
  append_u16(out, p.remote_htlcs);
}

void append_buffer(std::string& out, const LinkBuffer& buf) {
  out.push_back(static_cast<char>(buf.queue.size()));
  for (const Message& m : buf.queue) {
    out.push_back(static_cast<char>(m.kind));
    out.push_back(static_cast<char>(m.validity));
    append_u16(out, m.htlc_id);
  }
}

PeerMachine read_peer(const std::string& in, std::size_t& pos, Role role) {
  PeerMachine p;
  p.state = static_cast<FsmState>(static_cast<unsigned char>(in[pos++]));
  p.local_htlcs = read_u16(in, pos);
  p.remote_htlcs = read_u16(in, pos);
  p.role = role;
  return p;
}

LinkBuffer read_buffer(const std::string& in, std::size_t& pos,
                       unsigned capacity) {
  LinkBuffer buf;
  buf.capacity = capacity;
  std::size_t n = static_cast<unsigned char>(in[pos++]);
  for (std::size_t i = 0; i < n; ++i) {
    Message m;
    m.kind = static_cast<MessageType>(static_cast<unsigned char>(in[pos++]));
    m.validity = static_cast<Validity>(static_cast<unsigned char>(in[pos++]));
    m.htlc_id = read_u16(in, pos);
    buf.queue.push_back(m);
  }
  return buf;
}

// Dedup store for the searches: canonical encoding -> dense id, with parent
// pointers for counterexample reconstruction. Key equality doubles as the
// full-state comparison on hash-bucket collisions.
struct StateStore {
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<const std::string*> encodings;
  std::vector<std::pair<std::uint32_t, Event>> parents;

  std::uint32_t intern(std::string&& enc, std::uint32_t parent_id,
                       const Event& via, bool& is_new) {
    auto [it, inserted] =
        index.emplace(std::move(enc), static_cast<std::uint32_t>(size()));
    is_new = inserted;
    if (inserted) {
      encodings.push_back(&it->first);
      parents.emplace_back(parent_id, via);
    }
    return it->second;
  }

  std::size_t size() const { return encodings.size(); }
};

void check_counter_bound(const GlobalState& g, const ModelConfig& cfg) {
  if (g.peer_a.open_htlcs() > cfg.max_htlcs ||
      g.peer_b.open_htlcs() > cfg.max_htlcs)
    throw std::logic_error("htlc counter bound violated during exploration");
}

bool peer_in_end_state(const PeerMachine& p, const ModelConfig& cfg) {
  if (cfg.fail_channel_selfloop_fixture)
    return p.state == FsmState::Funded;
  return is_end_state(p.state);
}

Trace reconstruct_path(const StateStore& store, std::uint32_t id,
                       const ModelConfig& cfg) {
  std::vector<std::uint32_t> chain;
  for (std::uint32_t cur = id; cur != 0; cur = store.parents[cur].first)
    chain.push_back(cur);
  chain.push_back(0);
  std::reverse(chain.begin(), chain.end());

  Trace trace;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    trace.steps.push_back({decode_state(*store.encodings[chain[i]], cfg),
                           store.parents[chain[i + 1]].second});
  }
  trace.final_state = decode_state(*store.encodings[chain.back()], cfg);
  return trace;
}

}  // namespace

bool model_equal(const GlobalState& a, const GlobalState& b) {
  return a.peer_a == b.peer_a && a.peer_b == b.peer_b && a.link == b.link;
}

GlobalState initial_state(const ModelConfig& cfg) {
  GlobalState g;
  g.peer_a = initial_peer(Role::A);
  g.peer_b = initial_peer(Role::B);
  g.link = make_link(cfg.buffer_capacity);
  return g;
}

std::vector<std::pair<Event, GlobalState>> successors(const GlobalState& g,
                                                      const ModelConfig& cfg) {
  std::vector<std::pair<Event, GlobalState>> out;
  for (Role actor : {Role::A, Role::B}) {
    const PeerMachine& peer = g.peer(actor);

    if (peer.state == FsmState::FailChannel) {
      if (cfg.fail_channel_selfloop_fixture) {
        Event ev{actor, Action{ActionType::Timeout}, std::nullopt};
        out.emplace_back(ev, g);
      }
      continue;
    }

    auto inbox_head = g.link.inbound(actor).head();
    bool room = g.link.outbound(actor).has_room();
    for (const Action& action :
         enabled_actions(peer, inbox_head, room, cfg.max_htlcs)) {
      GlobalState next = g;
      if (action.type == ActionType::Deliver) receive(next.link, actor);
      ApplyResult res = apply(peer, action, cfg.max_htlcs);
      next.peer(actor) = res.peer;
      if (res.emitted) send(next.link, actor, *res.emitted);
      out.emplace_back(Event{actor, action, res.emitted}, std::move(next));
    }
  }
  return out;
}

GlobalState apply_event(const GlobalState& g, const Event& ev,
                        const ModelConfig& cfg) {
  const PeerMachine& peer = g.peer(ev.actor);

  if (peer.state == FsmState::FailChannel) {
    if (cfg.fail_channel_selfloop_fixture &&
        ev.action.type == ActionType::Timeout)
      return g;
    throw IllegalAction("no actions in FAIL_CHANNEL");
  }

  auto inbox_head = g.link.inbound(ev.actor).head();
  bool room = g.link.outbound(ev.actor).has_room();
  auto enabled = enabled_actions(peer, inbox_head, room, cfg.max_htlcs);
  if (std::find(enabled.begin(), enabled.end(), ev.action) == enabled.end())
    throw IllegalAction("event not enabled in this state");

  GlobalState next = g;
  if (ev.action.type == ActionType::Deliver) receive(next.link, ev.actor);
  ApplyResult res = apply(peer, ev.action, cfg.max_htlcs);
  next.peer(ev.actor) = res.peer;
  if (res.emitted) send(next.link, ev.actor, *res.emitted);
  if (res.emitted != ev.emitted)
    throw IllegalAction("event emission does not match the transition");
  return next;
}

std::string canonical_encoding(const GlobalState& g) {
  std::string out;
  out.reserve(16 + 4 * (g.link.a_to_b.queue.size() + g.link.b_to_a.queue.size()));
  append_peer(out, g.peer_a);
  append_peer(out, g.peer_b);
  out.push_back(static_cast<char>(g.claim_a));
  out.push_back(static_cast<char>(g.claim_b));
  append_buffer(out, g.link.a_to_b);
  append_buffer(out, g.link.b_to_a);
  return out;
}

GlobalState decode_state(const std::string& enc, const ModelConfig& cfg) {
  GlobalState g;
  std::size_t pos = 0;
  g.peer_a = read_peer(enc, pos, Role::A);
  g.peer_b = read_peer(enc, pos, Role::B);
  g.claim_a = static_cast<ClaimState>(static_cast<unsigned char>(enc[pos++]));
  g.claim_b = static_cast<ClaimState>(static_cast<unsigned char>(enc[pos++]));
  g.link.a_to_b = read_buffer(enc, pos, cfg.buffer_capacity);
  g.link.b_to_a = read_buffer(enc, pos, cfg.buffer_capacity);
  return g;
}

std::uint64_t canonical_hash(const GlobalState& g) {
  // FNV-1a over the canonical encoding.
  std::string enc = canonical_encoding(g);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : enc) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<ObservableEvent> observable_events(const Event& ev) {
  std::vector<ObservableEvent> out;
  if (ev.action.type == ActionType::Deliver)
    out.push_back({ev.actor, Direction::Receive, ev.action.msg.kind});
  if (ev.emitted)
    out.push_back({ev.actor, Direction::Send, ev.emitted->kind});
  return out;
}

ExplorationReport explore(const ModelConfig& cfg) {
  cfg.validate();
  auto t0 = Clock::now();

  ExplorationReport report;
  StateStore store;
  std::deque<std::uint32_t> frontier;

  bool is_new = false;
  GlobalState init = initial_state(cfg);
  store.intern(canonical_encoding(init), 0, Event{}, is_new);
  frontier.push_back(0);

  while (!frontier.empty()) {
    report.peak_frontier = std::max<std::uint64_t>(report.peak_frontier,
                                                   frontier.size());
    std::uint32_t id = frontier.front();
    frontier.pop_front();

    GlobalState g = decode_state(*store.encodings[id], cfg);
    auto succs = successors(g, cfg);
    report.transitions_fired += succs.size();

    if (succs.empty()) {
      bool accepting = peer_in_end_state(g.peer_a, cfg) &&
                       peer_in_end_state(g.peer_b, cfg);
      if (!accepting) report.deadlocks.push_back(reconstruct_path(store, id, cfg));
    }

    for (auto& [ev, next] : succs) {
      check_counter_bound(next, cfg);
      std::uint32_t nid = store.intern(canonical_encoding(next), id, ev, is_new);
      if (is_new) {
        if (cfg.state_cap != 0 && store.size() > cfg.state_cap)
          throw StateSpaceBudgetExceeded(cfg.state_cap);
        frontier.push_back(nid);
      }
    }
  }

  report.states_visited = store.size();
  report.elapsed_seconds = seconds_since(t0);
  report.peak_memory_bytes = peak_rss_bytes();
  return report;
}

std::vector<GlobalState> reachable_states(const ModelConfig& cfg) {
  cfg.validate();
  StateStore store;
  std::deque<std::uint32_t> frontier;
  bool is_new = false;
  store.intern(canonical_encoding(initial_state(cfg)), 0, Event{}, is_new);
  frontier.push_back(0);
  while (!frontier.empty()) {
    std::uint32_t id = frontier.front();
    frontier.pop_front();
    GlobalState g = decode_state(*store.encodings[id], cfg);
    for (auto& [ev, next] : successors(g, cfg)) {
      std::uint32_t nid = store.intern(canonical_encoding(next), id, ev, is_new);
      if (is_new) {
        if (cfg.state_cap != 0 && store.size() > cfg.state_cap)
          throw StateSpaceBudgetExceeded(cfg.state_cap);
        frontier.push_back(nid);
      }
    }
  }
  std::vector<GlobalState> out;
  out.reserve(store.size());
  for (const std::string* enc : store.encodings)
    out.push_back(decode_state(*enc, cfg));
  return out;
}

namespace {

struct ClaimOutcome {
  bool violated{false};
  ClaimState next{0};
};

// Steps the acting peer's claim over every observable event of the action,
// then over the channel-failure snapshot if the action killed the channel.
ClaimOutcome step_claim(const PropertyChecker& checker, ClaimState claim,
                        const Event& ev, const PeerMachine& before,
                        const PeerMachine& after) {
  for (const ObservableEvent& oe : observable_events(ev)) {
    ClaimStep st = claim_step(checker, claim, oe);
    if (st.verdict == ClaimVerdict::Violation) return {true, claim};
    claim = st.next;
  }
  if (before.state != FsmState::FailChannel &&
      after.state == FsmState::FailChannel) {
    ClaimStep st = claim_channel_failed(checker, claim);
    if (st.verdict == ClaimVerdict::Violation) return {true, claim};
    claim = st.next;
  }
  return {false, claim};
}

bool state_violates_invariant(const PropertyChecker& checker,
                              const GlobalState& g, const ModelConfig& cfg) {
  return !state_invariant_holds(checker, g.peer_a, cfg.max_htlcs) ||
         !state_invariant_holds(checker, g.peer_b, cfg.max_htlcs);
}

}  // namespace

SafetySearchResult find_safety_violation_detail(const ModelConfig& cfg,
                                                const PropertyChecker& checker) {
  cfg.validate();
  auto t0 = Clock::now();

  SafetySearchResult result;
  StateStore store;
  std::deque<std::uint32_t> frontier;

  bool is_new = false;
  GlobalState init = initial_state(cfg);
  init.claim_a = claim_initial(checker);
  init.claim_b = claim_initial(checker);
  store.intern(canonical_encoding(init), 0, Event{}, is_new);
  frontier.push_back(0);

  bool invariant_checker = checker.kind == CheckerKind::StateInvariant;
  if (invariant_checker && state_violates_invariant(checker, init, cfg)) {
    result.violation = Trace{{}, init};
  }

  while (!result.violation && !frontier.empty()) {
    std::uint32_t id = frontier.front();
    frontier.pop_front();

    GlobalState g = decode_state(*store.encodings[id], cfg);
    auto succs = successors(g, cfg);
    result.transitions_fired += succs.size();

    for (auto& [ev, next] : succs) {
      check_counter_bound(next, cfg);

      if (!invariant_checker) {
        ClaimState claim = ev.actor == Role::A ? g.claim_a : g.claim_b;
        ClaimOutcome out = step_claim(checker, claim, ev, g.peer(ev.actor),
                                      next.peer(ev.actor));
        if (out.violated) {
          Trace trace = reconstruct_path(store, id, cfg);
          trace.steps.push_back({g, ev});
          trace.final_state = next;
          result.violation = std::move(trace);
          break;
        }
        (ev.actor == Role::A ? next.claim_a : next.claim_b) = out.next;
      }

      std::uint32_t nid = store.intern(canonical_encoding(next), id, ev, is_new);
      if (!is_new) continue;
      if (cfg.state_cap != 0 && store.size() > cfg.state_cap)
        throw StateSpaceBudgetExceeded(cfg.state_cap);

      if (invariant_checker && state_violates_invariant(checker, next, cfg)) {
        result.violation = reconstruct_path(store, nid, cfg);
        break;
      }
      frontier.push_back(nid);
    }
  }

  result.states_visited = store.size();
  result.elapsed_seconds = seconds_since(t0);
  return result;
}

std::optional<Trace> find_safety_violation(const ModelConfig& cfg,
                                           const PropertyChecker& checker) {
  return find_safety_violation_detail(cfg, checker).violation;
}

namespace {

// Depth-first hunt for a cycle lying entirely inside the predicate-true
// subgraph of the reachable states. Returns the lasso via out parameters.
struct CycleHunter {
  const ModelConfig& cfg;
  StateStore& store;
  std::function<bool(const GlobalState&)> pred;

  struct Frame {
    std::uint32_t id;
    std::vector<std::pair<Event, std::uint32_t>> succ;
    std::size_t next{0};
  };

  std::vector<std::uint8_t> color;  // 0 white, 1 on stack, 2 done

  explicit CycleHunter(const ModelConfig& c, StateStore& s,
                       std::function<bool(const GlobalState&)> p)
      : cfg(c), store(s), pred(std::move(p)) {
    color.assign(store.size(), 0);
  }

  std::vector<std::pair<Event, std::uint32_t>> edges_within(
      std::uint32_t id) {
    std::vector<std::pair<Event, std::uint32_t>> out;
    GlobalState g = decode_state(*store.encodings[id], cfg);
    for (auto& [ev, next] : successors(g, cfg)) {
      if (!pred(next)) continue;
      auto it = store.index.find(canonical_encoding(next));
      if (it != store.index.end()) out.emplace_back(ev, it->second);
    }
    return out;
  }

  std::optional<LassoTrace> hunt() {
    for (std::uint32_t seed = 0; seed < store.size(); ++seed) {
      if (color[seed] != 0) continue;
      if (!pred(decode_state(*store.encodings[seed], cfg))) continue;
      auto lasso = dfs(seed);
      if (lasso) return lasso;
    }
    return std::nullopt;
  }

  std::optional<LassoTrace> dfs(std::uint32_t seed) {
    std::vector<Frame> stack;
    stack.push_back({seed, edges_within(seed), 0});
    color[seed] = 1;

    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next >= top.succ.size()) {
        color[top.id] = 2;
        stack.pop_back();
        continue;
      }
      auto [ev, target] = top.succ[top.next++];
      if (color[target] == 1) return close_lasso(stack, ev, target);
      if (color[target] == 0) {
        color[target] = 1;
        stack.push_back({target, edges_within(target), 0});
      }
    }
    return std::nullopt;
  }

  LassoTrace close_lasso(const std::vector<Frame>& stack, const Event& closing,
                         std::uint32_t target) {
    std::size_t pos = 0;
    while (stack[pos].id != target) ++pos;

    LassoTrace lasso;
    lasso.stem = reconstruct_path(store, target, cfg);

    Trace& cyc = lasso.cycle;
    for (std::size_t i = pos; i + 1 < stack.size(); ++i) {
      const Frame& f = stack[i];
      cyc.steps.push_back({decode_state(*store.encodings[f.id], cfg),
                           f.succ[f.next - 1].first});
    }
    cyc.steps.push_back(
        {decode_state(*store.encodings[stack.back().id], cfg), closing});
    cyc.final_state = decode_state(*store.encodings[target], cfg);
    return lasso;
  }
};

}  // namespace

CycleSearchResult find_acceptance_cycle_detail(const ModelConfig& cfg,
                                               const PropertyChecker& checker) {
  cfg.validate();
  auto t0 = Clock::now();

  CycleSearchResult result;

  // Reachability pass.
  StateStore store;
  std::deque<std::uint32_t> frontier;
  bool is_new = false;
  store.intern(canonical_encoding(initial_state(cfg)), 0, Event{}, is_new);
  frontier.push_back(0);
  while (!frontier.empty()) {
    std::uint32_t id = frontier.front();
    frontier.pop_front();
    GlobalState g = decode_state(*store.encodings[id], cfg);
    for (auto& [ev, next] : successors(g, cfg)) {
      check_counter_bound(next, cfg);
      std::uint32_t nid = store.intern(canonical_encoding(next), id, ev, is_new);
      if (is_new) {
        if (cfg.state_cap != 0 && store.size() > cfg.state_cap)
          throw StateSpaceBudgetExceeded(cfg.state_cap);
        frontier.push_back(nid);
      }
    }
  }
  result.states_visited = store.size();

  auto hunt_with = [&](std::function<bool(const GlobalState&)> pred)
      -> std::optional<LassoTrace> {
    CycleHunter hunter(cfg, store, std::move(pred));
    return hunter.hunt();
  };

  PropertyId id = checker.id;
  if (id == PropertyId::NonProgress) {
    result.lasso = hunt_with([&](const GlobalState& g) {
      return !liveness_progress_state(id, g.peer_a.state) &&
             !liveness_progress_state(id, g.peer_b.state);
    });
  } else {
    // Per-peer instantiation: a violation by either peer is a violation.
    for (Role r : {Role::A, Role::B}) {
      result.lasso = hunt_with([&, r](const GlobalState& g) {
        return !liveness_progress_state(id, g.peer(r).state);
      });
      if (result.lasso) break;
    }
  }

  result.elapsed_seconds = seconds_since(t0);
  return result;
}

std::optional<LassoTrace> find_acceptance_cycle(const ModelConfig& cfg,
                                                const PropertyChecker& checker) {
  return find_acceptance_cycle_detail(cfg, checker).lasso;
}

bool replay_trace(const Trace& trace, const ModelConfig& cfg) {
  GlobalState cur = initial_state(cfg);
  if (trace.steps.empty()) return model_equal(cur, trace.final_state);
  if (!model_equal(cur, trace.steps.front().state)) return false;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (!model_equal(cur, trace.steps[i].state)) return false;
    try {
      cur = apply_event(cur, trace.steps[i].event, cfg);
    } catch (const IllegalAction&) {
      return false;
    }
  }
  return model_equal(cur, trace.final_state);
}

bool replay_lasso(const LassoTrace& lasso, const ModelConfig& cfg) {
  if (!replay_trace(lasso.stem, cfg)) return false;
  if (lasso.cycle.steps.empty()) return false;
  GlobalState cur = lasso.stem.final_state;
  if (!model_equal(cur, lasso.cycle.steps.front().state)) return false;
  for (const TraceStep& step : lasso.cycle.steps) {
    if (!model_equal(cur, step.state)) return false;
    try {
      cur = apply_event(cur, step.event, cfg);
    } catch (const IllegalAction&) {
      return false;
    }
  }
  // Closed cycle: back where it started.
  return model_equal(cur, lasso.cycle.steps.front().state) &&
         model_equal(cur, lasso.cycle.final_state);
}

PropertyRunResult run_property(const ModelConfig& cfg, PropertyId id) {
  PropertyRunResult out;
  out.id = id;
  PropertyChecker checker = build(id);

  switch (checker.kind) {
    case CheckerKind::NeverClaim:
    case CheckerKind::MustMatchTrace:
    case CheckerKind::StateInvariant: {
      SafetySearchResult r = find_safety_violation_detail(cfg, checker);
      out.holds = !r.violation.has_value();
      out.states_visited = r.states_visited;
      out.elapsed_seconds = r.elapsed_seconds;
      out.violation = std::move(r.violation);
      return out;
    }
    case CheckerKind::BuchiNegation: {
      CycleSearchResult r = find_acceptance_cycle_detail(cfg, checker);
      out.holds = !r.lasso.has_value();
      out.states_visited = r.states_visited;
      out.elapsed_seconds = r.elapsed_seconds;
      out.lasso = std::move(r.lasso);
      return out;
    }
    case CheckerKind::Builtin: {
      if (id == PropertyId::NonProgress) {
        CycleSearchResult r = find_acceptance_cycle_detail(cfg, checker);
        out.holds = !r.lasso.has_value();
        out.states_visited = r.states_visited;
        out.elapsed_seconds = r.elapsed_seconds;
        out.lasso = std::move(r.lasso);
        return out;
      }
      ExplorationReport r = explore(cfg);
      out.holds = r.deadlocks.empty();
      out.states_visited = r.states_visited;
      out.elapsed_seconds = r.elapsed_seconds;
      if (!r.deadlocks.empty()) out.violation = r.deadlocks.front();
      return out;
    }
  }
  throw std::logic_error("unhandled checker kind");
}

std::uint64_t peak_rss_bytes() {
  rusage usage{};
  if (getrusage(RUSAGE_SELF, &usage) != 0) return 0;
  return static_cast<std::uint64_t>(usage.ru_maxrss) * 1024;  // kb on Linux
}

}  // namespace lnmc
