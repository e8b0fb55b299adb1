#include "lnmc/export.hpp"

#include <sstream>
#include <vector>

namespace lnmc {

namespace {

std::string message_field(const Message& m) {
  std::string out{to_string(m.kind)};
  out += "/";
  out += to_string(m.validity);
  out += "/";
  out += std::to_string(m.htlc_id);
  return out;
}

std::string buffer_field(const LinkBuffer& buf) {
  if (buf.queue.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < buf.queue.size(); ++i) {
    if (i > 0) out += ",";
    out += message_field(buf.queue[i]);
  }
  return out;
}

void append_record(std::string& out, std::size_t index, const Event& ev,
                   const GlobalState& post) {
  out += std::to_string(index);
  out += "|";
  out += to_string(ev.actor);
  out += "|";
  out += to_string(ev.action.type);
  out += "|";
  out += ev.action.type == ActionType::Deliver ? message_field(ev.action.msg)
                                               : "-";
  out += "|";
  out += to_string(post.peer_a.state);
  out += "|";
  out += to_string(post.peer_b.state);
  out += "|";
  out += buffer_field(post.link.a_to_b);
  out += "|";
  out += buffer_field(post.link.b_to_a);
  out += "|";
  out += std::to_string(post.claim_a) + "/" + std::to_string(post.claim_b);
  out += "|";
  out += ev.emitted ? message_field(*ev.emitted) : "-";
  out += "\n";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

[[noreturn]] void malformed(const std::string& what) {
  throw std::runtime_error("malformed trace document: " + what);
}

Message parse_message(const std::string& field) {
  auto parts = split(field, '/');
  if (parts.size() != 3) malformed("message field '" + field + "'");
  auto kind = message_type_from(parts[0]);
  auto validity = validity_from(parts[1]);
  if (!kind || !validity) malformed("message field '" + field + "'");
  Message m;
  m.kind = *kind;
  m.validity = *validity;
  m.htlc_id = static_cast<std::uint16_t>(std::stoul(parts[2]));
  return m;
}

}  // namespace

std::string fsm_to_dot() {
  std::string out = "digraph channel_operation {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < kFsmStateCount; ++i) {
    auto s = static_cast<FsmState>(i);
    out += "  \"";
    out += to_string(s);
    out += "\"";
    if (is_end_state(s)) out += " [peripheries=2]";
    out += ";\n";
  }
  for (const TransitionTriple& t : transition_table()) {
    out += "  \"";
    out += to_string(t.source);
    out += "\" -> \"";
    out += to_string(t.target);
    out += "\" [label=\"";
    out += to_string(t.cls);
    out += "\"];\n";
  }
  out += "}\n";
  return out;
}

std::string trace_to_text(const Trace& trace, const ModelConfig& cfg) {
  std::string out = "lnmc-trace-v1\n";
  out += "max_htlcs=" + std::to_string(cfg.max_htlcs) +
         " buffer_capacity=" + std::to_string(cfg.buffer_capacity) + "\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const GlobalState& post = i + 1 < trace.steps.size()
                                  ? trace.steps[i + 1].state
                                  : trace.final_state;
    append_record(out, i, trace.steps[i].event, post);
  }
  return out;
}

std::string lasso_to_text(const LassoTrace& lasso, const ModelConfig& cfg) {
  std::string out = trace_to_text(lasso.stem, cfg);
  out += "cycle\n";
  for (std::size_t i = 0; i < lasso.cycle.steps.size(); ++i) {
    const GlobalState& post = i + 1 < lasso.cycle.steps.size()
                                  ? lasso.cycle.steps[i + 1].state
                                  : lasso.cycle.final_state;
    append_record(out, i, lasso.cycle.steps[i].event, post);
  }
  return out;
}

Trace trace_from_text(const std::string& text, const ModelConfig& cfg) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "lnmc-trace-v1")
    malformed("missing header");
  if (!std::getline(in, line)) malformed("missing config line");

  Trace trace;
  GlobalState cur = initial_state(cfg);
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split(line, '|');
    if (fields.size() != 10) malformed("record with wrong field count");
    if (fields[0] != std::to_string(index)) malformed("step index out of order");

    Event ev;
    ev.actor = fields[1] == "A" ? Role::A : Role::B;
    Action action;
    if (fields[2] == "deliver") {
      action.type = ActionType::Deliver;
      action.msg = parse_message(fields[3]);
    } else if (fields[2] == "timeout") {
      action.type = ActionType::Timeout;
    } else if (fields[2] == "initiate_add") {
      action.type = ActionType::InitiateAdd;
    } else if (fields[2] == "initiate_commit") {
      action.type = ActionType::InitiateCommit;
    } else if (fields[2] == "initiate_fulfill") {
      action.type = ActionType::InitiateFulfill;
    } else if (fields[2] == "initiate_error") {
      action.type = ActionType::InitiateError;
    } else {
      malformed("unknown action '" + fields[2] + "'");
    }
    if (fields[9] != "-") {
      ev.emitted = parse_message(fields[9]);
      action.emit = ev.emitted->validity;
      if (action.type == ActionType::Deliver &&
          ev.emitted->kind == MessageType::Err)
        action.reply_err = true;
    }
    ev.action = action;

    GlobalState next;
    try {
      next = apply_event(cur, ev, cfg);
    } catch (const IllegalAction& e) {
      malformed(std::string("record does not replay: ") + e.what());
    }
    if (to_string(next.peer_a.state) != fields[4] ||
        to_string(next.peer_b.state) != fields[5])
      malformed("recorded post-states do not match the replay");
    if (buffer_field(next.link.a_to_b) != fields[6] ||
        buffer_field(next.link.b_to_a) != fields[7])
      malformed("recorded buffers do not match the replay");
    auto claims = split(fields[8], '/');
    if (claims.size() != 2) malformed("claim field");
    next.claim_a = static_cast<ClaimState>(std::stoul(claims[0]));
    next.claim_b = static_cast<ClaimState>(std::stoul(claims[1]));

    trace.steps.push_back({cur, ev});
    cur = next;
    ++index;
  }
  trace.final_state = cur;
  return trace;
}

std::string report_to_plain(const ExplorationReport& report,
                            bool deterministic) {
  std::ostringstream out;
  out << "states visited:    " << report.states_visited << "\n";
  out << "transitions fired: " << report.transitions_fired << "\n";
  out << "deadlocks:         " << report.deadlocks.size() << "\n";
  out << "peak frontier:     " << report.peak_frontier << "\n";
  out << "elapsed seconds:   "
      << (deterministic ? 0.0 : report.elapsed_seconds) << "\n";
  out << "peak memory bytes: "
      << (deterministic ? 0 : report.peak_memory_bytes) << "\n";
  return out.str();
}

std::string report_to_structured(const ExplorationReport& report,
                                 bool deterministic) {
  std::ostringstream out;
  out << "lnmc-report-v1\n";
  out << "states_visited=" << report.states_visited << "\n";
  out << "transitions_fired=" << report.transitions_fired << "\n";
  out << "deadlocks=" << report.deadlocks.size() << "\n";
  out << "peak_frontier=" << report.peak_frontier << "\n";
  out << "elapsed_seconds=" << (deterministic ? 0.0 : report.elapsed_seconds)
      << "\n";
  out << "peak_memory_bytes="
      << (deterministic ? 0 : report.peak_memory_bytes) << "\n";
  return out.str();
}

std::string summary_to_text(const PayoutSummary& sum) {
  std::ostringstream out;
  out << "scenario:  " << sum.scenario << "\n";
  out << "funding:   " << sum.funding << "\n";
  out << "balance A: " << sum.balance_a << "\n";
  out << "balance B: " << sum.balance_b << "\n";
  out << "confirmed: " << sum.confirmed_commitment << "\n";
  if (sum.rejected_double_spend)
    out << "rejected:  " << *sum.rejected_double_spend << " (double spend)\n";
  if (sum.open_htlcs > 0) out << "open htlcs: " << sum.open_htlcs << "\n";
  out << "blocks:    " << sum.blocks_elapsed << "\n";
  out << "timeline:\n";
  for (const std::string& entry : sum.timeline) out << "  " << entry << "\n";
  return out.str();
}

}  // namespace lnmc
