#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lnmc/export.hpp"
#include "lnmc/scenarios.hpp"
#include "lnmc/settlement.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitError = 2;

struct Options {
  lnmc::ModelConfig config;
  bool deterministic = false;
  std::string out;
  std::string format = "plain";
};

int write_output(const Options& opt, const std::string& text,
                 const std::string& what) {
  if (opt.out.empty()) {
    std::cout << text;
    return kExitOk;
  }
  std::ofstream file(opt.out, std::ios::binary);
  if (!file) {
    std::cerr << "error: cannot open " << opt.out << " for writing\n";
    return kExitError;
  }
  file << text;
  std::cout << what << " written to " << opt.out << "\n";
  return kExitOk;
}

std::string counterexample_text(const lnmc::PropertyRunResult& res,
                                const lnmc::ModelConfig& cfg) {
  if (res.violation) return lnmc::trace_to_text(*res.violation, cfg);
  if (res.lasso) return lnmc::lasso_to_text(*res.lasso, cfg);
  return {};
}

int run_verify(const Options& opt, const std::vector<std::string>& names) {
  bool any_violation = false;
  for (const std::string& name : names) {
    auto id = lnmc::property_id_from(name);
    if (!id) {
      std::cerr << "error: unknown property '" << name << "'\n";
      return kExitError;
    }
    auto res = lnmc::run_property(opt.config, *id);
    std::cout << name << ": " << (res.holds ? "holds" : "VIOLATED")
              << "  states=" << res.states_visited << "  elapsed=";
    if (opt.deterministic)
      std::cout << "0.000s";
    else
      std::cout << res.elapsed_seconds << "s";
    std::cout << "\n";

    if (!res.holds) {
      any_violation = true;
      std::string text = counterexample_text(res, opt.config);
      if (!text.empty()) {
        std::filesystem::path dir = opt.out.empty() ? "." : opt.out;
        std::filesystem::create_directories(dir);
        auto path = dir / ("counterexample_" + name + ".txt");
        std::ofstream file(path, std::ios::binary);
        if (!file) {
          std::cerr << "error: cannot write " << path << "\n";
          return kExitError;
        }
        file << text;
        std::cout << "  counterexample written to " << path.string() << "\n";
      }
    }
  }
  return any_violation ? kExitViolation : kExitOk;
}

int run_explore(const Options& opt) {
  auto report = lnmc::explore(opt.config);
  std::string text = opt.format == "structured"
                         ? lnmc::report_to_structured(report, opt.deterministic)
                         : lnmc::report_to_plain(report, opt.deterministic);
  return write_output(opt, text, "report");
}

int run_replay(const Options& opt, const std::string& scenario,
               const std::string& from_file) {
  if (!from_file.empty()) {
    std::ifstream file(from_file, std::ios::binary);
    if (!file) {
      std::cerr << "error: cannot read " << from_file << "\n";
      return kExitError;
    }
    std::string text((std::istreambuf_iterator<char>(file)),
                     std::istreambuf_iterator<char>());
    lnmc::Trace trace = lnmc::trace_from_text(text, opt.config);
    std::cout << "trace replayed: " << trace.length() << " events, final A="
              << lnmc::to_string(trace.final_state.peer_a.state) << " B="
              << lnmc::to_string(trace.final_state.peer_b.state) << "\n";
    if (!opt.out.empty())
      return write_output(opt, lnmc::trace_to_text(trace, opt.config), "trace");
    return kExitOk;
  }

  lnmc::SettlementParams params;
  lnmc::PayoutSummary summary;
  if (scenario == "congestion") {
    auto trace = lnmc::congestion_trace(opt.config);
    summary = lnmc::settle_congestion(trace, params, opt.config);
  } else {
    auto sc = lnmc::scenario_from(scenario);
    if (!sc) {
      std::cerr << "error: unknown scenario '" << scenario << "'\n";
      return kExitError;
    }
    lnmc::Trace trace = *sc == lnmc::Scenario::HonestComplete
                            ? lnmc::honest_payment_trace(opt.config)
                            : lnmc::payout_race_trace(opt.config);
    summary = lnmc::resolve_outcome(trace, *sc, params, opt.config);
  }
  return write_output(opt, lnmc::summary_to_text(summary), "summary");
}

int run_export(const Options& opt, const std::string& artifact,
               const std::string& property) {
  if (artifact == "fsm") return write_output(opt, lnmc::fsm_to_dot(), "fsm");

  if (artifact == "report") {
    auto report = lnmc::explore(opt.config);
    std::string text =
        opt.format == "structured"
            ? lnmc::report_to_structured(report, opt.deterministic)
            : lnmc::report_to_plain(report, opt.deterministic);
    return write_output(opt, text, "report");
  }

  if (artifact == "trace") {
    auto id = lnmc::property_id_from(property);
    if (!id) {
      std::cerr << "error: unknown property '" << property << "'\n";
      return kExitError;
    }
    auto res = lnmc::run_property(opt.config, *id);
    std::string text = counterexample_text(res, opt.config);
    if (text.empty()) {
      std::cerr << "error: property " << property
                << " holds; there is no trace to export\n";
      return kExitError;
    }
    return write_output(opt, text, "trace");
  }

  std::cerr << "error: unknown artifact '" << artifact << "'\n";
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lnmc: explicit-state checker for a two-peer payment channel "
               "operation protocol"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--max-htlcs", opt.config.max_htlcs,
                 "maximum concurrent HTLCs (default 10)")
      ->check(CLI::Range(1u, 483u));
  app.add_option("--buffer-capacity", opt.config.buffer_capacity,
                 "link buffer capacity per direction (default 1)")
      ->check(CLI::Range(1u, 16u));
  app.add_option("--csv-delay", opt.config.csv_delay,
                 "commitment maturity delay in blocks (default 1081)");
  app.add_option("--cltv-expiry", opt.config.cltv_expiry,
                 "HTLC refund timeout in blocks (default 40)");
  app.add_option("--state-cap", opt.config.state_cap,
                 "abort exploration past this many states (0 = unlimited)");
  app.add_flag("--deterministic", opt.deterministic,
               "zero timestamps and memory figures in outputs");
  app.add_option("--out", opt.out, "output file (or directory for verify)");
  app.add_option("--format", opt.format, "output format")
      ->check(CLI::IsMember({"plain", "structured", "dot"}));
  app.set_config("--config", "", "key=value configuration file");

  auto* verify = app.add_subcommand("verify", "check properties exhaustively");
  std::vector<std::string> properties;
  verify->add_option("--property", properties,
                     "p1 p2 p3 p4 p5 deadlock nonprogress")
      ->required()
      ->expected(1, 7);
  verify->fallthrough();

  auto* explore_cmd = app.add_subcommand("explore", "enumerate the state space");
  explore_cmd->fallthrough();

  auto* replay = app.add_subcommand("replay", "replay an attack scenario");
  std::string scenario;
  std::string from_file;
  replay->add_option("--scenario", scenario,
                     "congestion | payout-race-outcome1 | payout-race-outcome2 "
                     "| honest | honest-abort");
  replay->add_option("--from-file", from_file, "replay an exported trace file");
  replay->fallthrough();

  auto* export_cmd = app.add_subcommand("export", "export fsm/trace/report");
  std::string artifact;
  std::string property = "p3";
  export_cmd->add_option("--artifact", artifact, "fsm | trace | report")
      ->required();
  export_cmd->add_option("--property", property,
                         "property whose counterexample to export");
  export_cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    opt.config.validate();
    if (verify->parsed()) return run_verify(opt, properties);
    if (explore_cmd->parsed()) return run_explore(opt);
    if (replay->parsed()) {
      if (scenario.empty() && from_file.empty()) {
        std::cerr << "error: replay needs --scenario or --from-file\n";
        return kExitError;
      }
      return run_replay(opt, scenario, from_file);
    }
    if (export_cmd->parsed()) return run_export(opt, artifact, property);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
