#include "isoforge/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <istream>
#include <ostream>
#include <thread>

#include "isoforge/errors.hpp"
#include "isoforge/executor.hpp"
#include "isoforge/vm_interface.hpp"

namespace isoforge {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(CaseStatus s) { return s == CaseStatus::Completed ? "completed" : "hv_reset"; }

SystemSpec defect_free_twin(const SystemSpec& spec) {
  SystemSpec twin = spec;
  twin.defects.clear();
  return twin;
}

// --- planning -----------------------------------------------------------------

std::vector<PlannedCase> plan_cases(const Campaign& campaign) {
  const auto& spec = campaign.spec;
  std::vector<PlannedCase> out;
  auto push = [&](Technique tech, std::uint64_t seed, std::vector<TestCase> programs, std::uint64_t frames) {
    PlannedCase pc;
    pc.id = out.size();
    pc.technique = tech;
    pc.seed = seed;
    for (auto& tc : programs) {
      tc.id = pc.id;
      frames = std::max(frames, required_frames(tc, spec));
    }
    pc.programs = std::move(programs);
    pc.frames = std::max(frames, campaign.frames_per_case);
    out.push_back(std::move(pc));
    return &out.back();
  };

  for (const auto& t : campaign.techniques) {
    switch (t.technique) {
      case Technique::Fuzz: {
        std::vector<SurfaceEntry> catalog;
        for (const auto& e : full_surface()) {
          if (!t.fuzz.surface || e.surface == *t.fuzz.surface) catalog.push_back(e);
        }
        const auto layout = make_fuzz_layout(spec);
        for (auto& tc : gen_fuzz(t.seed, catalog, t.fuzz.policy, t.count, layout, t.fuzz.steps_per_case)) {
          const auto seed = tc.seed;
          push(Technique::Fuzz, seed, {std::move(tc)}, 1);
        }
        break;
      }
      case Technique::FaultInjection:
        for (auto& tc : gen_fault_plan(t.seed, t.fault.plan, spec)) {
          const auto seed = tc.seed;
          push(Technique::FaultInjection, seed, {std::move(tc)}, 1);
        }
        break;
      case Technique::Scripted:
        for (std::uint64_t k = 0; k < t.count; ++k) {
          for (const auto& text : t.script.scripts) {
            TestCase tc = parse_script(text);
            tc.seed = t.seed + k;
            tc.target = t.script.target;
            push(Technique::Scripted, tc.seed, {std::move(tc)}, 1);
          }
        }
        break;
      case Technique::CovertProbe:
        for (std::uint64_t k = 0; k < t.count; ++k) {
          auto pair = covert_pair(t.seed + k, t.covert.n_bits, t.covert.sender, t.covert.receiver);
          auto* pc = push(Technique::CovertProbe, t.seed + k, {std::move(pair.sender), std::move(pair.receiver)},
                          t.covert.n_bits + 1);
          pc->covert_receiver = t.covert.receiver;
          pc->sent_bits = std::move(pair.sent_bits);
        }
        break;
      default:
        break;
    }
  }
  return out;
}

// --- execution ----------------------------------------------------------------

CaseResult run_case(const Campaign& campaign, const Snapshot& boot, const BaselineMetrics& baseline,
                    const PlannedCase& planned) {
  CaseResult result;
  result.planned = planned;
  try {
    SystemState state = restore(boot);
    ExecutionPlan plan;
    plan.workloads = bind_workloads(campaign.spec);
    for (const auto& tc : planned.programs) plan.add_program(tc);

    MonitorConfig cfg = campaign.monitor;
    cfg.baseline = baseline;
    if (planned.covert_receiver) cfg.covert_receiver = planned.covert_receiver;
    Monitor monitor(campaign.spec, std::move(cfg));

    TraceDigest digest;
    Runner runner(state, std::move(plan));
    runner.run_frames(planned.frames, [&](const TraceEvent& e) {
      digest.add(e);
      monitor.observe(e);
      if (result.trace.size() < campaign.trace_cap) {
        result.trace.push_back(e);
      } else {
        result.trace_truncated = true;
      }
    });
    result.report = monitor.finalize(state.tick);
    result.trace_digest = digest.hex();
    result.events = digest.count();
    result.end_tick = state.tick;
    result.state_digest = state_digest(state);
  } catch (const std::exception& e) {
    result.status = CaseStatus::HvReset;
    result.error = e.what();
    result.report = MonitorReport{};
    result.trace.clear();
  }
  return result;
}

CampaignResults run_campaign(const Campaign& campaign, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  CampaignResults results;
  results.campaign = campaign;

  const auto planned = plan_cases(campaign);
  std::uint64_t frames = 0;
  for (const auto& p : planned) frames = std::max(frames, p.frames);
  const auto twin = defect_free_twin(campaign.spec);
  const BaselineMetrics baseline = capture_baseline(twin, bind_workloads(twin), frames);

  const Snapshot boot = snapshot(isoforge::boot(campaign.spec));
  results.boot_digest = state_digest(boot.state);

  results.cases.resize(planned.size());
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.parallelism.value_or(campaign.parallelism), planned.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < planned.size(); i = next++) {
      results.cases[i] = run_case(campaign, boot, baseline, planned[i]);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  results.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return results;
}

std::size_t CampaignResults::violation_count() const {
  std::size_t n = 0;
  for (const auto& c : cases) n += c.report.violations.size();
  return n;
}

std::string CampaignResults::digest() const {
  Fnv1a h;
  h.update(boot_digest);
  for (const auto& c : cases) {
    h.update_u64(c.planned.id);
    h.update(to_string(c.status));
    h.update(c.trace_digest);
    h.update(c.state_digest);
    h.update(report_to_json(c.report).dump());
  }
  return h.hex();
}

CoverageInput coverage_input(const CampaignResults& results) {
  CoverageInput in;
  std::set<std::pair<Surface, std::uint32_t>> ops;
  for (const auto& c : results.cases) {
    if (c.status != CaseStatus::Completed) continue;
    in.techniques_run.insert(c.planned.technique);
    in.exercised.insert(c.report.exercised);
    ops.insert(c.report.surface_ops.begin(), c.report.surface_ops.end());
    for (const auto& v : c.report.violations) {
      in.violations.push_back({v.mechanisms(), {c.planned.id, v.evidence.front()}});
    }
  }
  in.surface_ops_used = ops.size();
  in.surface_ops_total = full_surface().size();
  return in;
}

// --- serialisation ------------------------------------------------------------

json report_to_json(const MonitorReport& r) {
  auto violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"property", to_string(v.property)},
                          {"evidence", v.evidence},
                          {"detail", v.detail},
                          {"tick", v.tick},
                          {"partition", v.partition.value}});
  }
  json passed = json::object();
  for (const auto& [p, ok] : r.passed) passed[std::string(to_string(p))] = ok;
  auto exercised = json::array();
  for (auto m : r.exercised.items()) exercised.push_back(to_string(m));
  auto ops = json::array();
  for (const auto& [s, op] : r.surface_ops) ops.push_back({to_string(s), op});
  json covert = nullptr;
  if (r.covert) {
    covert = {{"symbols", r.covert->symbols}, {"capacity", r.covert->capacity}, {"accuracy", r.covert->accuracy}};
  }
  return {{"violations", std::move(violations)},
          {"passed", std::move(passed)},
          {"exercised", std::move(exercised)},
          {"surface_ops", std::move(ops)},
          {"covert", std::move(covert)},
          {"events", r.events}};
}

MonitorReport report_from_json(const json& j) {
  MonitorReport r;
  try {
    for (const auto& v : j.at("violations")) {
      auto p = parse_property(v.at("property").get<std::string>());
      if (!p) throw SchemaError("report.violations", "unknown property");
      r.violations.push_back(Violation{*p, v.at("evidence").get<std::vector<std::uint64_t>>(),
                                       v.at("detail").get<std::string>(), v.at("tick").get<Tick>(),
                                       PartitionId{v.at("partition").get<std::uint32_t>()}});
    }
    for (const auto& [name, ok] : j.at("passed").items()) {
      auto p = parse_property(name);
      if (!p) throw SchemaError("report.passed", "unknown property " + name);
      r.passed[*p] = ok.get<bool>();
    }
    for (const auto& m : j.at("exercised")) {
      auto mech = parse_mechanism(m.get<std::string>());
      if (!mech) throw SchemaError("report.exercised", "unknown mechanism");
      r.exercised.insert(*mech);
    }
    for (const auto& op : j.at("surface_ops")) {
      r.surface_ops.insert({op.at(0).get<std::string>() == "PV" ? Surface::Pv : Surface::Hwfv, op.at(1).get<std::uint32_t>()});
    }
    if (!j.at("covert").is_null()) {
      const auto& c = j.at("covert");
      r.covert = CovertMetrics{c.at("symbols").get<std::size_t>(), c.at("capacity").get<double>(),
                               c.at("accuracy").get<double>()};
    }
    r.events = j.at("events").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw SchemaError("report", e.what());
  }
  return r;
}

namespace {

void write_line(std::ostream& out, const ojson& j) { out << j.dump() << '\n'; }

std::string bits_text(const std::vector<std::uint8_t>& bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s += b ? '1' : '0';
  return s;
}

}  // namespace

void write_results_log(const CampaignResults& results, std::ostream& out) {
  const auto& spec = results.campaign.spec;
  write_line(out, ojson{{"record", "campaign"}, {"document", campaign_to_json(results.campaign)}});
  write_line(out, ojson{{"record", "boot"}, {"state_digest", results.boot_digest}});
  for (const auto& c : results.cases) {
    const auto id = c.planned.id;
    for (const auto& e : c.trace) write_line(out, ojson{{"record", "event"}, {"case", id}, {"event", to_json(e)}});
    for (const auto& v : c.report.violations) {
      write_line(out, ojson{{"record", "violation"},
                            {"case", id},
                            {"property", to_string(v.property)},
                            {"tag", v.tag()},
                            {"evidence", v.evidence},
                            {"partition", spec.partition(v.partition).name},
                            {"tick", v.tick},
                            {"detail", v.detail}});
    }
    auto programs = ojson::array();
    for (const auto& tc : c.planned.programs) {
      programs.push_back({{"target", spec.partition(tc.target).name}, {"script", render_script(tc.steps)}});
    }
    ojson rec{{"record", "case"},
              {"case", id},
              {"technique", to_string(c.planned.technique)},
              {"seed", c.planned.seed},
              {"frames", c.planned.frames},
              {"programs", std::move(programs)},
              {"covert_receiver", c.planned.covert_receiver ? ojson(spec.partition(*c.planned.covert_receiver).name)
                                                            : ojson(nullptr)},
              {"sent_bits", bits_text(c.planned.sent_bits)},
              {"status", to_string(c.status)},
              {"error", c.error},
              {"trace_digest", c.trace_digest},
              {"state_digest", c.state_digest},
              {"events", c.events},
              {"end_tick", c.end_tick},
              {"trace_truncated", c.trace_truncated},
              {"report", report_to_json(c.report)}};
    write_line(out, rec);
    write_line(out, ojson{{"record", "reset"}, {"case", id}});
  }
  write_line(out, ojson{{"record", "summary"},
                        {"cases", results.cases.size()},
                        {"violations", results.violation_count()},
                        {"digest", results.digest()},
                        {"wall_seconds", results.wall_seconds}});
}

namespace {

constexpr std::string_view kEventPrefix = R"({"record":"event")";

CampaignResults read_log(std::istream& in, bool with_traces) {
  CampaignResults results;
  bool have_campaign = false;
  std::map<std::uint64_t, std::vector<TraceEvent>> traces;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    // Replay needs no traces, and event lines dominate the log.
    if (!with_traces && line.starts_with(kEventPrefix)) continue;
    const std::string where = "log line " + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(where, e.what());
    }
    try {
      const auto kind = rec.at("record").get<std::string>();
      if (kind == "campaign") {
        results.campaign = load_campaign(rec.at("document"));
        have_campaign = true;
      } else if (kind == "boot") {
        results.boot_digest = rec.at("state_digest").get<std::string>();
      } else if (kind == "event") {
        traces[rec.at("case").get<std::uint64_t>()].push_back(event_from_json(rec.at("event")));
      } else if (kind == "case") {
        if (!have_campaign) throw SchemaError(where, "case record before the campaign record");
        const auto& spec = results.campaign.spec;
        CaseResult c;
        c.planned.id = rec.at("case").get<std::uint64_t>();
        auto tech = parse_technique(rec.at("technique").get<std::string>());
        if (!tech) throw SchemaError(where + ".technique", "unknown technique");
        c.planned.technique = *tech;
        c.planned.seed = rec.at("seed").get<std::uint64_t>();
        c.planned.frames = rec.at("frames").get<std::uint64_t>();
        for (const auto& p : rec.at("programs")) {
          TestCase tc = parse_script(p.at("script").get<std::string>());
          auto target = spec.find_partition(p.at("target").get<std::string>());
          if (!target) throw SchemaError(where + ".programs", "unknown partition");
          tc.id = c.planned.id;
          tc.seed = c.planned.seed;
          tc.technique = c.planned.technique;
          tc.target = *target;
          c.planned.programs.push_back(std::move(tc));
        }
        if (!rec.at("covert_receiver").is_null()) {
          c.planned.covert_receiver = spec.find_partition(rec.at("covert_receiver").get<std::string>());
        }
        for (char b : rec.at("sent_bits").get<std::string>()) c.planned.sent_bits.push_back(b == '1' ? 1 : 0);
        c.status = rec.at("status").get<std::string>() == "completed" ? CaseStatus::Completed : CaseStatus::HvReset;
        c.error = rec.at("error").get<std::string>();
        c.trace_digest = rec.at("trace_digest").get<std::string>();
        c.state_digest = rec.at("state_digest").get<std::string>();
        c.events = rec.at("events").get<std::uint64_t>();
        c.end_tick = rec.at("end_tick").get<Tick>();
        c.trace_truncated = rec.at("trace_truncated").get<bool>();
        c.report = report_from_json(rec.at("report"));
        results.cases.push_back(std::move(c));
      } else if (kind == "summary") {
        results.wall_seconds = rec.at("wall_seconds").get<double>();
      }
    } catch (const json::exception& e) {
      throw SchemaError(where, e.what());
    } catch (const ParseError& e) {
      throw SchemaError(where, e.what());
    }
  }
  if (!have_campaign) throw SchemaError("log", "no campaign record");
  for (auto& c : results.cases) {
    auto it = traces.find(c.planned.id);
    if (it != traces.end()) c.trace = std::move(it->second);
  }
  std::sort(results.cases.begin(), results.cases.end(),
            [](const CaseResult& a, const CaseResult& b) { return a.planned.id < b.planned.id; });
  return results;
}

}  // namespace

CampaignResults read_results_log(std::istream& in) { return read_log(in, true); }

ReplayOutcome replay_case(std::istream& log, std::uint64_t case_id) {
  ReplayOutcome out;
  const auto results = read_log(log, false);
  auto it = std::find_if(results.cases.begin(), results.cases.end(),
                         [&](const CaseResult& c) { return c.planned.id == case_id; });
  if (it == results.cases.end()) return out;
  out.found = true;
  out.stored_digest = it->trace_digest;

  const auto& campaign = results.campaign;
  const auto twin = defect_free_twin(campaign.spec);
  const auto baseline = capture_baseline(twin, bind_workloads(twin), it->planned.frames);
  const auto replayed = run_case(campaign, snapshot(boot(campaign.spec)), baseline, it->planned);
  out.replayed_digest = replayed.trace_digest;
  out.matches = replayed.status == it->status && replayed.trace_digest == it->trace_digest;
  return out;
}

}  // namespace isoforge
