#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "isoforge/errors.hpp"
#include "isoforge/evidence.hpp"
#include "isoforge/orchestrator.hpp"

using namespace isoforge;

namespace {

const char* kSmall = R"({
  "techniques": [
    {"name": "fuzz", "seed": 3, "count": 6, "params": {"policy": "random", "steps_per_case": 6}},
    {"name": "fault_injection", "seed": 4, "params": {"kinds": ["crash", "leak"], "targets": ["T_PV"], "frames": [1]}},
    {"name": "scripted", "seed": 5, "params": {"script": "greedy 2\npv COPY 0x20000 0x10000 8\n"}},
    {"name": "covert_probe", "seed": 6, "params": {"n_bits": 12}}
  ],
  "frames_per_case": 3
})";

Campaign with_defects(std::initializer_list<const char*> defects) {
  auto doc = nlohmann::json::parse(kSmall);
  doc["system"]["defects"] = nlohmann::json::array();
  for (auto d : defects) doc["system"]["defects"].push_back(d);
  return load_campaign(doc);
}

std::string log_of(const CampaignResults& r) {
  std::ostringstream out;
  write_results_log(r, out);
  return out.str();
}

std::vector<nlohmann::json> records(const std::string& log) {
  std::vector<nlohmann::json> out;
  std::istringstream in(log);
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("planning") {
  const auto c = load_campaign_text(kSmall);
  const auto plan = plan_cases(c);
  // 6 fuzz, 2 fault (2 kinds x 1 target x 1 frame), 1 script, 1 covert.
  REQUIRE(plan.size() == 10);
  for (std::size_t i = 0; i < plan.size(); ++i) CHECK(plan[i].id == i);
  CHECK(plan[0].technique == Technique::Fuzz);
  CHECK(plan[6].technique == Technique::FaultInjection);
  CHECK(plan[8].technique == Technique::Scripted);
  const auto& covert = plan[9];
  CHECK(covert.technique == Technique::CovertProbe);
  CHECK(covert.programs.size() == 2);
  CHECK(covert.sent_bits.size() == 12);
  CHECK(covert.frames >= 13);
  CHECK(covert.covert_receiver == PartitionId{4});
  for (const auto& pc : plan) CHECK(pc.frames >= c.frames_per_case);

  const auto again = plan_cases(c);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(again[i].programs == plan[i].programs);
    CHECK(again[i].frames == plan[i].frames);
  }
}

TEST_CASE("runs are deterministic and independent of parallelism") {
  const auto c = with_defects({"D-M1W", "D-T2"});
  const auto one = run_campaign(c, RunOptions{1});
  const auto four = run_campaign(c, RunOptions{4});
  const auto again = run_campaign(c, RunOptions{1});
  CHECK(one.digest() == four.digest());
  CHECK(one.digest() == again.digest());
  CHECK(evidence_document(one) == evidence_document(four));
  CHECK(emit_evidence(one, EvidenceFormat::Human) == emit_evidence(four, EvidenceFormat::Human));
  REQUIRE(one.cases.size() == four.cases.size());
  for (std::size_t i = 0; i < one.cases.size(); ++i) {
    CHECK(one.cases[i].planned.id == i);
    CHECK(one.cases[i].trace_digest == four.cases[i].trace_digest);
  }
  CHECK(one.violation_count() > 0);
}

TEST_CASE("a defect-free campaign is clean") {
  const auto r = run_campaign(load_campaign_text(kSmall));
  CHECK(r.violation_count() == 0);
  for (const auto& c : r.cases) CHECK(c.status == CaseStatus::Completed);
}

TEST_CASE("case results do not depend on execution order") {
  const auto c = with_defects({"D-T1", "D-M4"});
  const auto plan = plan_cases(c);
  auto st = boot(c.spec);
  const auto snap = snapshot(st);
  std::uint64_t frames = 0;
  for (const auto& pc : plan) frames = std::max(frames, pc.frames);
  const auto twin = defect_free_twin(c.spec);
  const auto baseline = capture_baseline(twin, bind_workloads(twin), frames);

  std::map<std::uint64_t, std::string> forward;
  for (const auto& pc : plan) forward[pc.id] = run_case(c, snap, baseline, pc).trace_digest;

  std::mt19937_64 rng(7);
  for (int round = 0; round < 3; ++round) {
    auto order = plan;
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& pc : order) CHECK(run_case(c, snap, baseline, pc).trace_digest == forward.at(pc.id));
  }
}

TEST_CASE("exceptions inside a case become an hv_reset status") {
  // A monitor configuration the loader would refuse makes the case throw.
  auto c = load_campaign_text(kSmall);
  c.monitor.thresholds.degradation = 5.0;
  auto st = boot(c.spec);
  const auto plan = plan_cases(c);
  const auto r = run_case(c, snapshot(st), BaselineMetrics{}, plan.front());
  CHECK(r.status == CaseStatus::HvReset);
  CHECK_FALSE(r.error.empty());
  CHECK(r.trace.empty());
  CHECK(r.report.clean());
}

TEST_CASE("results log round trip") {
  const auto c = with_defects({"D-M1W", "D-T4"});
  const auto r = run_campaign(c);
  const auto log = log_of(r);
  std::istringstream in(log);
  const auto back = read_results_log(in);
  CHECK(back.digest() == r.digest());
  CHECK(evidence_document(back) == evidence_document(r));
  REQUIRE(back.cases.size() == r.cases.size());
  for (std::size_t i = 0; i < r.cases.size(); ++i) {
    CHECK(back.cases[i].report == r.cases[i].report);
    CHECK(back.cases[i].planned.programs == r.cases[i].planned.programs);
    CHECK(back.cases[i].planned.sent_bits == r.cases[i].planned.sent_bits);
  }
  CHECK(log_of(back) == log);
}

TEST_CASE("log layout and completeness") {
  const auto r = run_campaign(with_defects({"D-M1W"}));
  const auto recs = records(log_of(r));
  REQUIRE(recs.size() >= 3);
  CHECK(recs.front()["record"] == "campaign");
  CHECK(recs[1]["record"] == "boot");
  CHECK(recs.back()["record"] == "summary");
  CHECK(recs.back()["cases"] == r.cases.size());

  // Every violation cites events that appear in the same case's event records.
  std::map<std::uint64_t, std::set<std::uint64_t>> seqs;
  std::size_t violations = 0, resets = 0;
  std::uint64_t open_case = 0;
  for (std::size_t i = 2; i + 1 < recs.size(); ++i) {
    const auto kind = recs[i]["record"].get<std::string>();
    const auto id = recs[i]["case"].get<std::uint64_t>();
    if (kind == "event") {
      seqs[id].insert(recs[i]["event"]["seq"].get<std::uint64_t>());
    } else if (kind == "violation") {
      ++violations;
      for (const auto& s : recs[i]["evidence"]) CHECK(seqs[id].contains(s.get<std::uint64_t>()));
    } else if (kind == "case") {
      CHECK(id == open_case);
    } else if (kind == "reset") {
      CHECK(id == open_case);
      ++open_case;
      ++resets;
    } else {
      FAIL("unexpected record " << kind);
    }
  }
  CHECK(resets == r.cases.size());
  CHECK(violations == r.violation_count());
}

TEST_CASE("replay") {
  const auto r = run_campaign(with_defects({"D-T2"}));
  const auto log = log_of(r);
  for (const auto& c : r.cases) {
    std::istringstream in(log);
    const auto out = replay_case(in, c.planned.id);
    CHECK(out.found);
    CHECK(out.matches);
    CHECK(out.stored_digest == c.trace_digest);
  }
  {
    std::istringstream in(log);
    CHECK_FALSE(replay_case(in, 12345).found);
  }
  SUBCASE("a tampered digest is detected") {
    auto recs = records(log);
    std::string tampered;
    for (auto& rec : recs) {
      if (rec["record"] == "case" && rec["case"] == 0) rec["trace_digest"] = "0000000000000000";
      tampered += rec.dump() + "\n";
    }
    std::istringstream in(tampered);
    const auto out = replay_case(in, 0);
    CHECK(out.found);
    CHECK_FALSE(out.matches);
  }
}

TEST_CASE("a malformed log is a schema error") {
  std::istringstream in("{\"record\":\"boot\"}\nnot json\n");
  CHECK_THROWS_AS(read_results_log(in), SchemaError);
}

TEST_CASE("evidence soundness") {
  const auto r = run_campaign(with_defects({"D-M1W", "D-T1", "D-T4"}));
  const auto doc = evidence_document(r);
  std::set<std::pair<std::uint64_t, std::uint64_t>> cited;
  for (const auto& c : r.cases) {
    for (const auto& v : c.report.violations) cited.insert({c.planned.id, v.evidence.front()});
  }
  bool refuted = false;
  for (const auto& s : doc["coverage"]["sfrs"]) {
    if (s["status"] == "refuted") {
      refuted = true;
      REQUIRE_FALSE(s["evidence"].empty());
      for (const auto& e : s["evidence"]) {
        CHECK(cited.contains({e["case"].get<std::uint64_t>(), e["seq"].get<std::uint64_t>()}));
      }
    } else {
      CHECK(s["evidence"].empty());
    }
  }
  CHECK(refuted);
  std::vector<std::string> ids;
  for (const auto& d : doc["defects"]) {
    ids.push_back(d["id"].get<std::string>());
    CHECK(d["detected"] == true);
  }
  CHECK(ids == std::vector<std::string>{"D-M1W", "D-T1", "D-T4"});
  CHECK_FALSE(doc.dump().find("wall_seconds") != std::string::npos);
}

TEST_CASE("coverage input aggregates completed cases") {
  const auto r = run_campaign(load_campaign_text(kSmall));
  const auto in = coverage_input(r);
  CHECK(in.surface_ops_total == 16);
  CHECK(in.surface_ops_used > 0);
  CHECK(in.surface_ops_used <= in.surface_ops_total);
  CHECK(in.techniques_run.size() == 4);
  CHECK(in.violations.empty());
}
