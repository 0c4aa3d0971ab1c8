#include "isoforge/workloads.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <random>
#include <sstream>

#include "isoforge/errors.hpp"

namespace isoforge {

Word mix64(Word x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

std::uint64_t required_frames(const TestCase& tc, const SystemSpec& spec) {
  const Tick frame = spec.schedule.major_frame();
  const Tick per_frame = std::max<Tick>(1, spec.schedule.ticks_for(tc.target));
  std::uint64_t frames = 0;
  Tick wait_ticks = 0;
  std::uint64_t actions = 0;
  for (const auto& step : tc.steps) {
    if (const auto* w = std::get_if<Wait>(&step)) {
      if (w->frames) {
        frames += w->count;
      } else {
        wait_ticks += w->count;
      }
    } else {
      ++actions;
    }
  }
  // Each action may land just after the target's slot closed.
  return frames + ceil_div(wait_ticks, frame) + ceil_div(actions, per_frame) * 2 + 2;
}

// --- scripts ----------------------------------------------------------------

namespace {

struct Token {
  std::string_view text;
  std::size_t column = 0;  // 1-based
};

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

std::optional<Word> parse_number(std::string_view text) {
  int base = 10;
  if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
    text.remove_prefix(2);
    base = 16;
  }
  if (text.empty()) return std::nullopt;
  Word v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, base);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

class LineParser {
 public:
  LineParser(std::size_t line, std::vector<Token> tokens) : line_(line), tokens_(std::move(tokens)) {}

  [[noreturn]] void fail(std::size_t token, const std::string& reason) const {
    const std::size_t col = token < tokens_.size() ? tokens_[token].column
                                                   : (tokens_.empty() ? 1 : tokens_.back().column + tokens_.back().text.size());
    throw ParseError(line_, col, reason);
  }

  Word number(std::size_t token) const {
    if (token >= tokens_.size()) fail(token, "missing argument");
    auto v = parse_number(tokens_[token].text);
    if (!v) fail(token, "expected a number, got '" + std::string(tokens_[token].text) + "'");
    return *v;
  }

  void expect_count(std::size_t n, const std::string& what) const {
    if (tokens_.size() < n) fail(tokens_.size(), what + " expects " + std::to_string(n - 1) + " argument(s)");
    if (tokens_.size() > n) fail(n, "unexpected argument '" + std::string(tokens_[n].text) + "'");
  }

  std::vector<Word> rest(std::size_t from) const {
    std::vector<Word> out;
    for (std::size_t i = from; i < tokens_.size(); ++i) out.push_back(number(i));
    return out;
  }

  Step call(Surface surface) const {
    if (tokens_.size() < 2) fail(1, "missing call name");
    const auto name = tokens_[1].text;
    if (auto raw = parse_number(name)) {
      auto args = rest(2);
      if (surface == Surface::Pv) return PvCall{static_cast<std::uint32_t>(*raw), std::move(args)};
      return HwfvTrap{static_cast<std::uint32_t>(*raw), std::move(args)};
    }
    const SurfaceEntry* entry = find_entry(surface, name);
    if (entry == nullptr) {
      fail(1, std::string(surface == Surface::Pv ? "unknown call '" : "unknown trap reason '") + std::string(name) + "'");
    }
    expect_count(2 + entry->arity(), entry->name);
    auto args = rest(2);
    if (surface == Surface::Pv) return PvCall{entry->id, std::move(args)};
    return HwfvTrap{entry->id, std::move(args)};
  }

  Step inject() const {
    if (tokens_.size() < 2) fail(1, "missing fault kind");
    const auto kind = tokens_[1].text;
    if (kind == "crash") {
      expect_count(2, "crash");
      return InjectFault{FaultKind::Crash, 0, 0};
    }
    if (kind == "mem_corrupt") {
      expect_count(4, "mem_corrupt");
      return InjectFault{FaultKind::MemCorrupt, number(2), number(3)};
    }
    if (kind == "reg_corrupt") {
      expect_count(4, "reg_corrupt");
      const Word idx = number(2);
      if (idx >= kRegisterCount) fail(2, "register index out of range");
      return InjectFault{FaultKind::RegCorrupt, idx, number(3)};
    }
    if (kind == "leak") {
      expect_count(3, "leak");
      return InjectFault{FaultKind::Leak, number(2), 0};
    }
    fail(1, "unknown fault kind '" + std::string(kind) + "'");
  }

  Step parse() const {
    const auto verb = tokens_[0].text;
    if (verb == "pv") return call(Surface::Pv);
    if (verb == "hwfv") return call(Surface::Hwfv);
    if (verb == "inject") return inject();
    if (verb == "wait") {
      if (tokens_.size() == 3) {
        if (tokens_[2].text != "frames") fail(2, "expected 'frames'");
        return Wait{number(1), true};
      }
      expect_count(2, "wait");
      return Wait{number(1), false};
    }
    if (verb == "greedy") {
      expect_count(2, "greedy");
      return SetGreedy{number(1)};
    }
    if (verb == "dev") {
      expect_count(2, "dev");
      if (tokens_[1].text == "busy") return DevPulse{true};
      if (tokens_[1].text == "idle") return DevPulse{false};
      fail(1, "expected busy or idle");
    }
    fail(0, "unknown directive '" + std::string(verb) + "'");
  }

 private:
  std::size_t line_;
  std::vector<Token> tokens_;
};

std::string number_text(Word v) {
  if (v < 0x10000) return std::to_string(v);
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string call_text(std::string_view verb, Surface surface, std::uint32_t id, const std::vector<Word>& args) {
  std::string out(verb);
  out += ' ';
  const SurfaceEntry* entry = find_entry(surface, id);
  if (entry != nullptr && entry->arity() == args.size()) {
    out += entry->name;
  } else {
    out += std::to_string(id);
  }
  for (auto a : args) out += ' ' + number_text(a);
  return out;
}

}  // namespace

TestCase parse_script(std::string_view text) {
  TestCase tc;
  tc.technique = Technique::Scripted;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = tokenize(line);
    if (!tokens.empty()) tc.steps.push_back(LineParser(line_no, std::move(tokens)).parse());
    start = end + 1;
  }
  if (tc.steps.empty()) throw ParseError(1, 1, "script has no steps");
  return tc;
}

std::string render_step(const Step& step) {
  return std::visit(
      overloaded{
          [](const PvCall& c) { return call_text("pv", Surface::Pv, c.id, c.args); },
          [](const HwfvTrap& t) { return call_text("hwfv", Surface::Hwfv, t.reason, t.payload); },
          [](const InjectFault& f) -> std::string {
            switch (f.kind) {
              case FaultKind::MemCorrupt: return "inject mem_corrupt " + number_text(f.a) + " " + number_text(f.b);
              case FaultKind::RegCorrupt: return "inject reg_corrupt " + number_text(f.a) + " " + number_text(f.b);
              case FaultKind::Leak: return "inject leak " + number_text(f.a);
              case FaultKind::Crash:
              case FaultKind::Halt: break;
            }
            return "inject crash";
          },
          [](const Wait& w) { return "wait " + std::to_string(w.count) + (w.frames ? " frames" : ""); },
          [](const SetGreedy& g) { return "greedy " + std::to_string(g.extra); },
          [](const DevPulse& d) { return std::string(d.busy ? "dev busy" : "dev idle"); },
      },
      step);
}

std::string render_script(const std::vector<Step>& steps) {
  std::string out;
  for (const auto& s : steps) out += render_step(s) + "\n";
  return out;
}

// --- fuzzing ----------------------------------------------------------------

std::string_view to_string(FuzzPolicy p) {
  switch (p) {
    case FuzzPolicy::Sweep: return "sweep";
    case FuzzPolicy::Random: return "random";
    case FuzzPolicy::Malformed: return "malformed";
  }
  return "?";
}

std::optional<FuzzPolicy> parse_fuzz_policy(std::string_view text) {
  for (auto p : {FuzzPolicy::Sweep, FuzzPolicy::Random, FuzzPolicy::Malformed}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

namespace {

constexpr Address kUnmappedProbe = 0xDEAD0000;

const MemoryRegion* first_region(const SystemSpec& spec, auto pred) {
  for (const auto& r : spec.regions) {
    if (pred(r)) return &r;
  }
  return nullptr;
}

Address unmapped_address(const SystemSpec& spec) {
  Address a = kUnmappedProbe;
  while (const MemoryRegion* r = spec.region_containing(a)) a = r->base + r->size;
  return a;
}

std::optional<FuzzTarget> target_for(const SystemSpec& spec, PartitionKind kind) {
  auto actor = std::find_if(spec.partitions.begin(), spec.partitions.end(),
                            [&](const PartitionSpec& p) { return p.kind == kind; });
  if (actor == spec.partitions.end()) return std::nullopt;
  const PartitionId self = actor->id;
  const Address unmapped = unmapped_address(spec);
  auto base_or = [&](const MemoryRegion* r) { return r ? r->base : unmapped; };
  auto owned_by_regular = [&](const MemoryRegion& r) { return r.owner && !spec.is_test(*r.owner); };
  auto owned_by_other_test = [&](const MemoryRegion& r) { return r.owner && *r.owner != self && spec.is_test(*r.owner); };

  const MemoryRegion* own = first_region(spec, [&](const MemoryRegion& r) { return r.owner == self && r.kind == RegionKind::Ram; });
  if (own == nullptr) own = first_region(spec, [&](const MemoryRegion& r) { return r.owner == self; });
  const MemoryRegion* regular = first_region(spec, [&](const MemoryRegion& r) { return owned_by_regular(r) && r.kind == RegionKind::Ram; });
  const MemoryRegion* other_test = first_region(spec, [&](const MemoryRegion& r) { return owned_by_other_test(r) && r.kind == RegionKind::Ram; });
  const MemoryRegion* kernel = first_region(spec, [](const MemoryRegion& r) { return r.space == AddressSpace::Kernel; });
  const MemoryRegion* own_mmio = first_region(spec, [&](const MemoryRegion& r) { return r.owner == self && r.kind == RegionKind::Mmio; });
  const MemoryRegion* foreign_mmio = first_region(spec, [&](const MemoryRegion& r) { return owned_by_regular(r) && r.kind == RegionKind::Mmio; });
  if (foreign_mmio == nullptr) {
    foreign_mmio = first_region(spec, [&](const MemoryRegion& r) { return r.owner != self && r.kind == RegionKind::Mmio; });
  }

  FuzzTarget t;
  t.actor = self;
  t.addresses = {base_or(own),      base_or(regular),      base_or(other_test), base_or(kernel),
                 base_or(own_mmio), base_or(foreign_mmio), unmapped,
                 own ? own->base + own->size - sizeof(Word) : unmapped};
  return t;
}

using Rng = std::mt19937_64;

std::size_t draw(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

std::vector<SurfaceEntry> usable(const std::vector<SurfaceEntry>& catalog, const FuzzLayout& layout) {
  std::vector<SurfaceEntry> out;
  for (const auto& e : catalog) {
    if (layout.target(e.surface)) out.push_back(e);
  }
  return out;
}

Step make_call(Surface surface, std::uint32_t id, std::vector<Word> args) {
  if (surface == Surface::Pv) return PvCall{id, std::move(args)};
  return HwfvTrap{id, std::move(args)};
}

std::vector<Word> random_args(const SurfaceEntry& e, const FuzzLayout& layout, Rng& rng) {
  std::vector<Word> args;
  for (const auto& d : e.args) {
    const auto values = domain_values(d, layout, e.surface);
    args.push_back(values[draw(rng, values.size())]);
  }
  return args;
}

bool bounded(const ArgDomain& d) { return d.min > 0 || d.max != ~Word{0}; }

Step malformed_step(const std::vector<SurfaceEntry>& entries, const FuzzLayout& layout, Surface surface, Rng& rng) {
  const std::uint32_t count = static_cast<std::uint32_t>(list_surface(surface).size());
  switch (draw(rng, 3)) {
    case 0: {
      const std::uint32_t id = count + static_cast<std::uint32_t>(draw(rng, 1000));
      std::vector<Word> args(draw(rng, 4), 0);
      for (auto& a : args) a = rng();
      return make_call(surface, id, std::move(args));
    }
    case 1: {
      const auto& e = entries[draw(rng, entries.size())];
      auto args = random_args(e, layout, rng);
      if (args.empty() || draw(rng, 2) == 0) {
        args.push_back(rng());
      } else {
        args.pop_back();
      }
      return make_call(surface, e.id, std::move(args));
    }
    default: {
      std::vector<const SurfaceEntry*> candidates;
      for (const auto& e : entries) {
        if (std::any_of(e.args.begin(), e.args.end(), bounded)) candidates.push_back(&e);
      }
      const auto& e = *candidates[draw(rng, candidates.size())];
      auto args = random_args(e, layout, rng);
      std::vector<std::size_t> slots;
      for (std::size_t i = 0; i < e.args.size(); ++i) {
        if (bounded(e.args[i])) slots.push_back(i);
      }
      const std::size_t i = slots[draw(rng, slots.size())];
      const auto& d = e.args[i];
      args[i] = d.max != ~Word{0} ? d.max + 1 + draw(rng, 16) : d.min - 1;
      return make_call(surface, e.id, std::move(args));
    }
  }
}

}  // namespace

FuzzLayout make_fuzz_layout(const SystemSpec& spec) {
  FuzzLayout layout;
  layout.pv = target_for(spec, PartitionKind::TestPv);
  layout.hwfv = target_for(spec, PartitionKind::TestHwfv);
  layout.partitions = static_cast<std::uint32_t>(spec.partitions.size());
  layout.regions = static_cast<std::uint32_t>(spec.regions.size());
  return layout;
}

std::vector<Word> domain_values(const ArgDomain& domain, const FuzzLayout& layout, Surface surface) {
  std::vector<Word> out;
  switch (domain.kind) {
    case DomainKind::Address: {
      const auto& t = layout.target(surface);
      if (t) out = t->addresses;
      break;
    }
    case DomainKind::Length: out = {8, 64, 640, 4096}; break;
    case DomainKind::Bytes: out = {1, 4096, 65536, Word{1} << 20}; break;
    case DomainKind::Partition:
      for (std::uint32_t i = 0; i < layout.partitions; ++i) out.push_back(i);
      break;
    case DomainKind::Region:
      for (std::uint32_t i = 0; i < layout.regions; ++i) out.push_back(i);
      break;
    case DomainKind::AccessMode: out = {1, 2}; break;
    case DomainKind::Value: out = {0, 1, 0xCAFE, ~Word{0}}; break;
    case DomainKind::Register: out = {0, 3, 7}; break;
    case DomainKind::Port: out = {0, 1, 255}; break;
    case DomainKind::Busy: out = {0, 1, 4, 16}; break;
  }
  std::erase_if(out, [&](Word v) { return !domain.admits(v); });
  if (out.empty()) out.push_back(domain.min);
  return out;
}

std::vector<TestCase> gen_fuzz(std::uint64_t seed, const std::vector<SurfaceEntry>& catalog, FuzzPolicy policy,
                               std::size_t n, const FuzzLayout& layout, std::size_t steps_per_case) {
  const auto entries = usable(catalog, layout);
  std::vector<TestCase> cases;
  if (entries.empty() || steps_per_case == 0) return cases;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& anchor = entries[i % entries.size()];
    const Surface surface = anchor.surface;
    TestCase tc;
    tc.id = i;
    tc.seed = splitmix64(seed + i);
    tc.technique = Technique::Fuzz;
    tc.target = layout.target(surface)->actor;
    Rng rng(tc.seed);

    std::vector<SurfaceEntry> same_surface;
    for (const auto& e : entries) {
      if (e.surface == surface) same_surface.push_back(e);
    }

    for (std::size_t s = 0; s < steps_per_case; ++s) {
      switch (policy) {
        case FuzzPolicy::Sweep: {
          // Visit v of this entry continues the enumeration where visit v-1 stopped.
          const std::uint64_t j = (i / entries.size()) * steps_per_case + s;
          std::vector<Word> args;
          std::uint64_t period = 1;
          for (std::size_t a = 0; a < anchor.args.size(); ++a) {
            const auto values = domain_values(anchor.args[a], layout, surface);
            const std::uint64_t idx = a == 0 ? j % values.size() : (j + j / period) % values.size();
            args.push_back(values[idx]);
            period *= values.size();
          }
          tc.steps.push_back(make_call(surface, anchor.id, std::move(args)));
          break;
        }
        case FuzzPolicy::Random: {
          const auto& e = s == 0 ? anchor : same_surface[draw(rng, same_surface.size())];
          tc.steps.push_back(make_call(surface, e.id, random_args(e, layout, rng)));
          break;
        }
        case FuzzPolicy::Malformed:
          tc.steps.push_back(malformed_step(same_surface, layout, surface, rng));
          break;
      }
    }
    cases.push_back(std::move(tc));
  }
  return cases;
}

// --- fault injection --------------------------------------------------------

std::vector<TestCase> gen_fault_plan(std::uint64_t seed, const FaultPlan& plan, const SystemSpec& spec) {
  for (auto t : plan.targets) {
    if (!spec.valid_partition(t.value)) throw PlanTargetsRegularPartition("#" + std::to_string(t.value));
    if (!spec.is_test(t)) throw PlanTargetsRegularPartition(spec.partition(t).name);
  }
  Address corrupt = plan.corrupt_addr.value_or(0);
  if (!plan.corrupt_addr) {
    for (const auto& r : spec.regions) {
      if (r.owner && !spec.is_test(*r.owner)) {
        corrupt = r.base;
        break;
      }
    }
  }

  std::vector<TestCase> cases;
  for (auto kind : plan.kinds) {
    for (auto target : plan.targets) {
      for (auto frame : plan.frames) {
        TestCase tc;
        tc.id = cases.size();
        tc.seed = splitmix64(seed + tc.id);
        tc.technique = Technique::FaultInjection;
        tc.target = target;
        tc.steps.push_back(Wait{frame, true});
        switch (kind) {
          case FaultKind::MemCorrupt: tc.steps.push_back(InjectFault{kind, corrupt, plan.corrupt_value}); break;
          case FaultKind::RegCorrupt: tc.steps.push_back(InjectFault{kind, plan.reg_index, plan.reg_value}); break;
          case FaultKind::Leak: tc.steps.push_back(InjectFault{kind, plan.leak_bytes, 0}); break;
          case FaultKind::Crash:
          case FaultKind::Halt: tc.steps.push_back(InjectFault{FaultKind::Crash, 0, 0}); break;
        }
        cases.push_back(std::move(tc));
      }
    }
  }
  return cases;
}

// --- covert probes ----------------------------------------------------------

CovertPair covert_pair(std::uint64_t seed, std::size_t n_bits, PartitionId sender, PartitionId receiver) {
  CovertPair out;
  Rng rng(seed);
  out.sender = TestCase{0, seed, Technique::CovertProbe, {}, sender};
  out.receiver = TestCase{1, seed, Technique::CovertProbe, {}, receiver};
  for (std::size_t k = 0; k < n_bits; ++k) {
    const auto bit = static_cast<std::uint8_t>(rng() >> 63);
    out.sent_bits.push_back(bit);
    out.sender.steps.push_back(DevPulse{bit == 1});
    out.sender.steps.push_back(Wait{1, true});
    out.receiver.steps.push_back(PvCall{static_cast<std::uint32_t>(Hypercall::DevAccess), {0}});
    out.receiver.steps.push_back(Wait{1, true});
  }
  return out;
}

// --- representative workloads -----------------------------------------------

std::string_view to_string(WorkloadProfile p) {
  switch (p) {
    case WorkloadProfile::PeriodicCompute: return "periodic_compute";
    case WorkloadProfile::MemoryToucher: return "memory_toucher";
    case WorkloadProfile::DeviceClient: return "device_client";
  }
  return "?";
}

WorkloadProfile parse_profile(std::string_view name) {
  for (auto p : {WorkloadProfile::PeriodicCompute, WorkloadProfile::MemoryToucher, WorkloadProfile::DeviceClient}) {
    if (to_string(p) == name) return p;
  }
  throw UnknownProfile(std::string(name));
}

Workload representative(std::string_view profile) { return Workload(parse_profile(profile)); }

Word Workload::run_frame(SystemState& state, PartitionId self, std::uint64_t frame) const {
  const Word salt = mix64(static_cast<Word>(profile_) + 1);
  const MemoryRegion* own = nullptr;
  for (const auto& r : state.spec.regions) {
    if (r.owner == self && r.kind == RegionKind::Ram && r.size >= 4 * sizeof(Word)) {
      own = &r;
      break;
    }
  }

  Word checksum = 0;
  switch (profile_) {
    case WorkloadProfile::PeriodicCompute: {
      Word prev = 0;
      if (own) prev = read_word(state, self, own->base).value_or(0);
      checksum = mix64(prev ^ (salt + frame));
      if (own) write_word(state, self, own->base, checksum);
      set_register(state, self, 0, checksum);
      break;
    }
    case WorkloadProfile::MemoryToucher: {
      checksum = salt;
      for (Word i = 0; i < 4; ++i) {
        Word w = mix64(salt + frame * 4 + i);
        if (own) {
          const Address a = own->base + i * sizeof(Word);
          w = mix64(read_word(state, self, a).value_or(0) + salt + frame * 4 + i);
          write_word(state, self, a, w);
        }
        checksum = mix64(checksum ^ w);
      }
      set_register(state, self, 1, checksum);
      break;
    }
    case WorkloadProfile::DeviceClient: {
      const Word arg = 1;
      auto r = dispatch_pv(state, self, static_cast<std::uint32_t>(Hypercall::DevAccess), std::span<const Word>(&arg, 1));
      checksum = mix64(salt ^ frame);
      set_register(state, self, 2, r.value);
      break;
    }
  }
  dispatch_pv(state, self, static_cast<std::uint32_t>(Hypercall::ConsoleWrite), std::span<const Word>(&checksum, 1));
  return checksum;
}

}  // namespace isoforge
