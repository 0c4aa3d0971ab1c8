#include "isoforge/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "isoforge/certmap.hpp"
#include "isoforge/errors.hpp"
#include "isoforge/evidence.hpp"
#include "isoforge/monitor.hpp"
#include "isoforge/orchestrator.hpp"
#include "isoforge/vm_interface.hpp"

namespace isoforge {

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel log_level() {
  const char* v = std::getenv("ISOFORGE_LOG");
  if (v == nullptr) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

class Log {
 public:
  explicit Log(std::ostream& err) : err_(err), level_(log_level()) {}
  void info(const std::string& msg) const {
    if (level_ != LogLevel::Quiet) err_ << "isoforge: " << msg << "\n";
  }
  void debug(const std::string& msg) const {
    if (level_ == LogLevel::Debug) err_ << "isoforge: debug: " << msg << "\n";
  }
  // Errors are printed regardless of level; the level only gates chatter.
  void error(const std::string& msg) const { err_ << "isoforge: error: " << msg << "\n"; }

 private:
  std::ostream& err_;
  LogLevel level_;
};

std::ifstream open_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read results log '" + path + "'");
  return in;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

int cmd_run(const std::string& campaign_path, const std::string& out_dir, std::optional<std::size_t> parallel,
            std::optional<std::uint64_t> seed_override, const std::string& format, std::ostream& out,
            const Log& log) {
  Campaign campaign = load_campaign_file(campaign_path);
  if (seed_override) {
    for (auto& t : campaign.techniques) t.seed = *seed_override;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create '" + out_dir + "': " + ec.message());

  RunOptions options;
  options.parallelism = parallel;
  log.info("running " + campaign_path);
  const auto results = run_campaign(campaign, options);
  log.debug("campaign finished in " + std::to_string(results.wall_seconds) + " s");

  const std::filesystem::path dir(out_dir);
  {
    std::ofstream f(dir / "results.ndjson", std::ios::binary);
    if (!f) throw ConfigError("cannot write results log in '" + out_dir + "'");
    write_results_log(results, f);
  }
  const auto doc = evidence_document(results);
  if (format == "machine" || format == "both") write_file(dir / "evidence.json", doc.dump(2) + "\n");
  if (format == "human" || format == "both") write_file(dir / "evidence.txt", render_human(doc));

  out << results.cases.size() << " cases, " << results.violation_count() << " violations, digest "
      << results.digest() << "\n";
  return results.violation_count() == 0 ? kExitOk : kExitViolations;
}

int cmd_list(const std::string& what, std::ostream& out) {
  const auto& map = builtin_certmap();
  if (what == "mechanisms") {
    for (auto m : kAllMechanisms) out << to_string(m) << "  " << describe(m) << "\n";
  } else if (what == "surface") {
    for (const auto& e : full_surface()) {
      out << to_string(e.surface) << " " << e.id << " " << e.name << "(";
      for (std::size_t i = 0; i < e.args.size(); ++i) out << (i ? ", " : "") << e.args[i].name;
      out << ")\n";
    }
  } else if (what == "defects") {
    for (auto d : kAllDefects) out << to_string(d) << "  " << to_string(mechanism_of(d)) << "  " << describe(d) << "\n";
  } else if (what == "sfrs") {
    for (const auto& e : map.sfrs()) out << e.ref << "  " << e.name << "  " << e.mechanisms.to_string() << "\n";
  } else if (what == "sars") {
    for (const auto& e : map.sars()) out << e.ref << "  " << e.name << "  " << e.listed << "\n";
  } else if (what == "standards") {
    for (const auto& r : map.standards()) out << r.standard << "  " << r.title << "  " << r.scope << "\n";
  } else if (what == "properties") {
    for (auto p : kAllProperties) out << to_string(p) << "  " << tag_of(p) << "\n";
  } else {
    throw ConfigError("unknown listing '" + what +
                      "' (expected mechanisms, surface, defects, sfrs, sars, standards or properties)");
  }
  return kExitOk;
}

int cmd_map(const std::string& query, std::ostream& out) {
  const auto eq = query.find('=');
  if (eq == std::string::npos) throw ConfigError("query must be sfr=<ref>, mech=<id> or sar=<ref>");
  const auto key = query.substr(0, eq);
  const auto value = query.substr(eq + 1);
  const auto& map = builtin_certmap();
  if (key == "sfr") {
    out << map.mechanisms_for_sfr(value).to_string() << "\n";
  } else if (key == "mech") {
    const auto m = parse_mechanism(value);
    if (!m) throw ConfigError("unknown mechanism '" + value + "'");
    const auto refs = map.sfrs_for_mechanism(*m);
    if (refs.empty()) {
      out << "(none)\n";
    } else {
      for (std::size_t i = 0; i < refs.size(); ++i) out << (i ? "," : "") << refs[i];
      out << "\n";
    }
  } else if (key == "sar") {
    const auto& ts = map.techniques_for_sar(value);
    for (std::size_t i = 0; i < ts.size(); ++i) out << (i ? ", " : "") << describe(ts[i]);
    out << "\n";
  } else {
    throw ConfigError("unknown query key '" + key + "'");
  }
  return kExitOk;
}

int cmd_replay(const std::string& log_path, std::uint64_t case_id, std::ostream& out, const Log& log) {
  auto in = open_log(log_path);
  const auto r = replay_case(in, case_id);
  if (!r.found) {
    log.error("case " + std::to_string(case_id) + " is not in " + log_path);
    return kExitUsage;
  }
  out << "case " << case_id << ": stored " << r.stored_digest << ", replayed " << r.replayed_digest << ", "
      << (r.matches ? "match" : "MISMATCH") << "\n";
  return r.matches ? kExitOk : kExitViolations;
}

int cmd_report(const std::string& log_path, const std::string& format, std::ostream& out) {
  auto in = open_log(log_path);
  const auto results = read_results_log(in);
  const auto doc = evidence_document(results);
  out << (format == "machine" ? doc.dump(2) + "\n" : render_human(doc));
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const Log log(err);
  CLI::App app{"Isolation assessment for a simulated partitioning hypervisor", "isoforge"};
  app.require_subcommand(1);

  std::string campaign_path, out_dir = "isoforge-out", format = "both";
  std::optional<std::size_t> parallel;
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "Run a campaign and write the results log and evidence package");
  run->add_option("campaign", campaign_path, "Campaign JSON file")->required();
  run->add_option("-o,--out", out_dir, "Output directory")->capture_default_str();
  run->add_option("--parallel", parallel, "Concurrent cases (overrides the campaign)")->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "Use this seed for every technique");
  run->add_option("--format", format, "Evidence rendering")
      ->check(CLI::IsMember({"human", "machine", "both"}))
      ->capture_default_str();

  std::string what;
  auto* list = app.add_subcommand("list", "List a catalog");
  list->add_option("what", what, "mechanisms|surface|defects|sfrs|sars|standards|properties")->required();

  std::string query;
  auto* map = app.add_subcommand("map", "Query the certification mappings");
  map->add_option("query", query, "sfr=<ref> | mech=<id> | sar=<ref>")->required();

  std::string log_path;
  std::uint64_t case_id = 0;
  auto* replay = app.add_subcommand("replay", "Re-execute a logged case and compare trace digests");
  replay->add_option("log", log_path, "Results log")->required();
  replay->add_option("case", case_id, "Case id")->required();

  std::string report_format = "human";
  auto* report = app.add_subcommand("report", "Render the evidence package from a results log");
  report->add_option("log", log_path, "Results log")->required();
  report->add_option("--format", report_format, "Rendering")
      ->check(CLI::IsMember({"human", "machine"}))
      ->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(campaign_path, out_dir, parallel, seed_override, format, out, log);
    if (*list) return cmd_list(what, out);
    if (*map) return cmd_map(query, out);
    if (*replay) return cmd_replay(log_path, case_id, out, log);
    if (*report) return cmd_report(log_path, report_format, out);
  } catch (const SchemaError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const ConfigError& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const UnknownDefect& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const UnknownProfile& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const UnknownSfr& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const UnknownSar& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const PlanTargetsRegularPartition& e) {
    log.error(e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    log.error(std::string("script ") + e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log.error(std::string("internal: ") + e.what());
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace isoforge
