#include <doctest.h>

#include <cmath>
#include <random>

#include "isoforge/campaign.hpp"
#include "isoforge/errors.hpp"
#include "isoforge/executor.hpp"
#include "isoforge/monitor.hpp"
#include "isoforge/orchestrator.hpp"
#include "support.hpp"

using namespace isoforge;
using isoforge::testing::mini_spec;

namespace {

constexpr PartitionId T_PV{0}, R1{1}, T_HW{2}, R2{3}, R3{4};

struct Run {
  SystemState state;
  MonitorReport report;
};

MonitorConfig config_for(const SystemSpec& spec, std::uint64_t frames) {
  MonitorConfig cfg;
  cfg.baseline = capture_baseline(defect_free_twin(spec), bind_workloads(spec), frames);
  return cfg;
}

Run run(const SystemSpec& spec, const std::vector<std::pair<PartitionId, std::string>>& programs,
        std::uint64_t frames) {
  Run r{boot(spec), {}};
  ExecutionPlan plan;
  plan.workloads = bind_workloads(spec);
  for (const auto& [p, text] : programs) {
    auto tc = parse_script(text);
    tc.target = p;
    plan.add_program(tc);
  }
  execute_plan(r.state, plan, frames, nullptr);
  r.report = evaluate(spec, config_for(spec, frames), r.state.trace, r.state.tick);
  return r;
}

struct Scenario {
  DefectId defect;
  PartitionId target;
  std::string script;
  PropertyId expected;
};

// Entropy-based mutual information of two binary sequences, written out
// directly from the joint counts.
double mutual_information(const std::vector<std::uint8_t>& x, const std::vector<std::uint8_t>& y) {
  double joint[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < x.size(); ++i) joint[x[i]][y[i]] += 1.0;
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double pab = joint[a][b] / n;
      const double pa = (joint[a][0] + joint[a][1]) / n;
      const double pb = (joint[0][b] + joint[1][b]) / n;
      if (pab > 0) mi += pab * std::log2(pab / (pa * pb));
    }
  }
  return mi;
}

double h2(double p) { return -p * std::log2(p) - (1 - p) * std::log2(1 - p); }

std::vector<Tick> channel(const std::vector<std::uint8_t>& bits, double flip, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(flip);
  std::vector<Tick> out;
  for (auto b : bits) out.push_back((coin(rng) ? !b : b) ? 6 : 2);
  return out;
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(coin(rng) ? 1 : 0);
  return out;
}

}  // namespace

TEST_CASE("property names and tags") {
  for (auto p : kAllProperties) CHECK(parse_property(to_string(p)) == p);
  CHECK_FALSE(parse_property("SP-NOPE"));
  CHECK(tag_of(PropertyId::FtCont) == "fault-isolation");
  CHECK(tag_of(PropertyId::TpCovert) == "M3,T4");
  CHECK(tag_of(PropertyId::SpKern) == "M2");
}

TEST_CASE("each seeded defect is caught by its property and the clean twin stays silent") {
  const std::vector<Scenario> scenarios = {
      {DefectId::M1W, T_PV, "pv COPY 0x20000 0x10000 8\n", PropertyId::SpInt},
      {DefectId::M1R, T_PV, "pv COPY 0x10000 0x20000 8\n", PropertyId::SpConf},
      {DefectId::M2, T_HW, "hwfv CONTROL_REG 0 1\n", PropertyId::SpKern},
      {DefectId::M4, T_PV, "pv ALLOC 65536\n", PropertyId::SpQuota},
      {DefectId::T1, T_PV, "inject reg_corrupt 0 0xCAFE\nwait 2 frames\n", PropertyId::TpResid},
      {DefectId::T2, T_PV, "greedy 3\n", PropertyId::TpSlot},
      {DefectId::T3, T_PV, "pv COPY 0x10400 0x10000 640\n", PropertyId::TpWcet},
  };
  const auto clean = builtin_testbed();
  for (const auto& s : scenarios) {
    CAPTURE(to_string(s.defect));
    const auto bad = run(seed_defect(clean, s.defect), {{s.target, s.script}}, 3);
    CHECK(bad.report.count(s.expected) > 0);
    CHECK_FALSE(bad.report.passed.at(s.expected));
    for (const auto& v : bad.report.violations) {
      REQUIRE_FALSE(v.evidence.empty());
      CHECK(v.evidence.front() < bad.state.trace.size());
      CHECK(v.mechanisms() == mechanisms_of(v.property));
    }
    const auto good = run(clean, {{s.target, s.script}}, 3);
    CHECK(good.report.clean());
  }
}

TEST_CASE("evidence points at the offending event") {
  const auto spec = seed_defect(builtin_testbed(), DefectId::M1W);
  const auto r = run(spec, {{T_PV, "pv COPY 0x20000 0x10000 8\n"}}, 2);
  REQUIRE(r.report.count(PropertyId::SpInt) == 1);
  const auto& v = r.report.violations.front();
  const auto& e = r.state.trace.at(v.evidence.front());
  CHECK(e.seq == v.evidence.front());
  CHECK(e.kind == EventKind::MemWrite);
  CHECK(e.actor == T_PV);
  CHECK(e.as<MemAccessInfo>().addr == 0x20000);
  CHECK(v.partition == T_PV);
}

TEST_CASE("TP-COVERT fires over a modulated device and not over a normalized one") {
  const auto pair = covert_pair(11, 64, T_PV, R3);
  auto covert_run = [&](const SystemSpec& spec) {
    auto st = boot(spec);
    ExecutionPlan plan;
    plan.workloads = bind_workloads(spec);
    plan.add_program(pair.sender);
    plan.add_program(pair.receiver);
    execute_plan(st, plan, 65, nullptr);
    MonitorConfig cfg;
    cfg.covert_receiver = R3;
    return evaluate(spec, cfg, st.trace, st.tick);
  };
  const auto bad = covert_run(seed_defect(builtin_testbed(), DefectId::T4));
  REQUIRE(bad.covert);
  CHECK(bad.covert->capacity > 0.9);
  CHECK(bad.covert->accuracy > 0.95);
  CHECK(bad.count(PropertyId::TpCovert) == 1);

  const auto good = covert_run(builtin_testbed());
  REQUIRE(good.covert);
  CHECK(good.covert->capacity <= 0.05);
  CHECK(good.clean());
}

TEST_CASE("FT-CONT flags a fault that disturbs another partition") {
  const auto spec = seed_defect(builtin_testbed(), DefectId::M1W);
  const auto bad = run(spec, {{T_PV, "wait 1 frames\ninject mem_corrupt 0x20000 7\n"}}, 4);
  CHECK(bad.report.count(PropertyId::FtCont) > 0);
  for (const auto& v : bad.report.violations) {
    if (v.property == PropertyId::FtCont) CHECK(v.tag() == "fault-isolation");
  }
  const auto crash = run(builtin_testbed(), {{T_PV, "wait 1 frames\ninject crash\n"}}, 4);
  CHECK(crash.report.clean());
}

TEST_CASE("incremental observation matches batch evaluation") {
  const auto spec = seed_defect(seed_defect(builtin_testbed(), DefectId::M1W), DefectId::T2);
  auto st = boot(spec);
  ExecutionPlan plan;
  plan.workloads = bind_workloads(spec);
  auto tc = parse_script("pv COPY 0x20000 0x10000 8\ngreedy 3\ninject mem_corrupt 0x40000 1\n");
  tc.target = T_PV;
  plan.add_program(tc);
  execute_plan(st, plan, 4, nullptr);
  const auto cfg = config_for(spec, 4);

  Monitor m(spec, cfg);
  std::vector<Violation> streamed;
  for (const auto& e : st.trace) {
    const auto got = m.observe(e);
    for (const auto& v : got) CHECK(v.evidence.front() <= e.seq);
    streamed.insert(streamed.end(), got.begin(), got.end());
  }
  const auto report = m.finalize(st.tick);
  const auto batch = evaluate(spec, cfg, st.trace, st.tick);
  CHECK(report == batch);
  REQUIRE(streamed.size() <= batch.violations.size());
  CHECK(std::equal(streamed.begin(), streamed.end(), batch.violations.begin()));
  CHECK(batch.count(PropertyId::SpInt) > 0);
  CHECK(batch.count(PropertyId::TpSlot) > 0);
}

TEST_CASE("disabled properties never report") {
  const auto spec = seed_defect(builtin_testbed(), DefectId::M1W);
  auto st = boot(spec);
  ExecutionPlan plan;
  auto tc = parse_script("pv COPY 0x20000 0x10000 8\n");
  tc.target = T_PV;
  plan.add_program(tc);
  execute_plan(st, plan, 1, nullptr);
  MonitorConfig cfg;
  cfg.enabled.erase(PropertyId::SpInt);
  const auto report = evaluate(spec, cfg, st.trace, st.tick);
  CHECK(report.clean());
  CHECK_FALSE(report.passed.contains(PropertyId::SpInt));
}

TEST_CASE("stream ordering is enforced") {
  const auto spec = mini_spec({2, 2});
  auto st = boot(spec);
  advance(st, 8);
  REQUIRE(st.trace.size() >= 3);
  SUBCASE("repeated seq") {
    Monitor m(spec, {});
    m.observe(st.trace[0]);
    m.observe(st.trace[1]);
    CHECK_THROWS_AS(m.observe(st.trace[1]), OutOfOrderEvent);
  }
  SUBCASE("time going backwards") {
    Monitor m(spec, {});
    auto late = st.trace[2];
    auto early = st.trace[1];
    early.seq = late.seq + 1;
    m.observe(late);
    if (early.tick < late.tick) CHECK_THROWS_AS(m.observe(early), OutOfOrderEvent);
  }
  SUBCASE("after finalize") {
    Monitor m(spec, {});
    m.observe(st.trace[0]);
    (void)m.finalize(st.tick);
    CHECK_THROWS_AS(m.observe(st.trace[1]), OutOfOrderEvent);
  }
}

TEST_CASE("configuration validation") {
  MonitorConfig cfg;
  cfg.thresholds.degradation = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.thresholds.degradation = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.thresholds.degradation = 0.2;
  cfg.thresholds.covert_capacity = -0.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.thresholds.covert_capacity = 0.05;
  CHECK_NOTHROW(validate(cfg));
  CHECK_THROWS_AS(capture_baseline(seed_defect(builtin_testbed(), DefectId::T1), {}, 2), SpecHasDefects);
}

TEST_CASE("capacity estimator") {
  std::mt19937_64 rng(2024);
  SUBCASE("noiseless channel carries one bit") {
    const auto bits = random_bits(1000, rng);
    const auto lat = channel(bits, 0.0, rng);
    CHECK(estimate_capacity(bits, lat) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(decode_accuracy(bits, lat) == doctest::Approx(1.0));
    CHECK(decode_bits(lat) == bits);
  }
  SUBCASE("independent output carries nothing") {
    const auto bits = random_bits(1000, rng);
    const auto lat = channel(random_bits(1000, rng), 0.0, rng);
    CHECK(estimate_capacity(bits, lat) <= 0.02);
  }
  SUBCASE("binary symmetric channel") {
    const auto bits = random_bits(1000, rng);
    const auto lat = channel(bits, 0.11, rng);
    const double est = estimate_capacity(bits, lat);
    CHECK(est == doctest::Approx(1.0 - h2(0.11)).epsilon(0.06));
    CHECK(std::abs(est - 0.5) <= 0.03);
    CHECK(est == doctest::Approx(mutual_information(bits, decode_bits(lat))));
  }
  SUBCASE("more noise never helps") {
    const auto bits = random_bits(4000, rng);
    const auto clean = channel(bits, 0.0, rng);
    std::vector<Tick> noisy = clean;
    std::bernoulli_distribution coin(0.5);
    double last = estimate_capacity(bits, clean);
    // Randomizing a growing prefix degrades the channel step by step.
    for (std::size_t k = 400; k <= bits.size(); k += 400) {
      for (std::size_t i = k - 400; i < k; ++i) noisy[i] = coin(rng) ? 6 : 2;
      const double now = estimate_capacity(bits, noisy);
      CHECK(now <= last + 0.01);
      last = now;
    }
  }
  SUBCASE("constant latency carries nothing") {
    const auto bits = random_bits(100, rng);
    CHECK(estimate_capacity(bits, std::vector<Tick>(100, 8)) == doctest::Approx(0.0));
  }
  SUBCASE("lengths must agree") {
    CHECK_THROWS_AS(estimate_capacity({1, 0}, {2}), LengthMismatch);
  }
}

TEST_CASE("baseline capture is deterministic and covers every workload") {
  const auto spec = builtin_testbed();
  const auto a = capture_baseline(spec, bind_workloads(spec), 5);
  CHECK(a == capture_baseline(spec, bind_workloads(spec), 5));
  CHECK(a.partitions.size() == 3);
  for (auto p : {R1, R2, R3}) {
    const auto& pb = a.partitions.at(p);
    REQUIRE(pb.active_ticks.size() == 5);
    for (auto t : pb.active_ticks) CHECK(t == spec.schedule.ticks_for(p));
    for (const auto& c : pb.checksums) CHECK(c.has_value());
  }
  CHECK(a.partitions.at(R3).latencies.front() == spec.device.normalized_latency);
}
