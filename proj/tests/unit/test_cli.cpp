#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "isoforge/cli.hpp"

using namespace isoforge;
namespace fs = std::filesystem;

namespace {

struct Out {
  int code;
  std::string out;
  std::string err;
};

Out cli(std::vector<std::string> args) {
  ::setenv("ISOFORGE_LOG", "quiet", 1);
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string campaign(std::string_view name) { return std::string(ISOFORGE_CAMPAIGN_DIR) + "/" + std::string(name); }

fs::path scratch(std::string_view name) {
  auto dir = fs::temp_directory_path() / ("isoforge-cli-test-" + std::string(name));
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("map queries") {
  CHECK(cli({"map", "sfr=FRU_RSA"}).out == "M4,T3,T4\n");
  CHECK(cli({"map", "sfr=FDP_IFC.2.1"}).out == "M1,M2,M3\n");
  CHECK(cli({"map", "mech=T2"}).out == "(none)\n");
  CHECK(cli({"map", "mech=M3"}).out == "FDP_IFC.2.1,FDP_IFF.1.1,FTP_SEP\n");
  CHECK(cli({"map", "sar=AVA_VAN"}).out == "penetration(not implemented), fuzz, taint(not implemented)\n");
  CHECK(cli({"map", "sfr=NOPE"}).code == kExitUsage);
  CHECK(cli({"map", "mech=M9"}).code == kExitUsage);
  CHECK(cli({"map", "sar=NOPE"}).code == kExitUsage);
  CHECK(cli({"map", "frob"}).code == kExitUsage);
}

TEST_CASE("listings are stable") {
  for (const char* what : {"mechanisms", "surface", "defects", "sfrs", "sars", "standards", "properties"}) {
    CAPTURE(what);
    const auto a = cli({"list", what});
    CHECK(a.code == kExitOk);
    CHECK_FALSE(a.out.empty());
    CHECK(cli({"list", what}).out == a.out);
  }
  const auto surface = cli({"list", "surface"}).out;
  CHECK(std::count(surface.begin(), surface.end(), '\n') == 16);
  const auto defects = cli({"list", "defects"}).out;
  CHECK(std::count(defects.begin(), defects.end(), '\n') == 9);
  CHECK(cli({"list", "everything"}).code == kExitUsage);
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"run"}).code == kExitUsage);
  CHECK(cli({"run", campaign("clean.json"), "--parallel", "0"}).code == kExitUsage);
  CHECK(cli({"run", campaign("clean.json"), "--format", "pdf"}).code == kExitUsage);
  CHECK(cli({"run", "/nonexistent.json"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("schema errors in a campaign exit 2") {
  const auto dir = scratch("schema");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"techniques":[{"name":"fuzz"}],"parallelism":0})";
  const auto r = cli({"run", (dir / "bad.json").string(), "-o", (dir / "out").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("$.parallelism") != std::string::npos);
  std::ofstream(dir / "defect.json") << R"({"system":{"defects":["D-T9"]},"techniques":[{"name":"fuzz"}]})";
  CHECK(cli({"run", (dir / "defect.json").string(), "-o", (dir / "out").string()}).code == kExitUsage);
  fs::remove_all(dir);
}

TEST_CASE("run, replay and report") {
  const auto dir = scratch("run");
  const auto clean = cli({"run", campaign("clean.json"), "-o", dir.string()});
  CHECK(clean.code == kExitOk);
  CHECK(clean.out.find(" 0 violations") != std::string::npos);
  for (const char* f : {"results.ndjson", "evidence.json", "evidence.txt"}) CHECK(fs::exists(dir / f));

  const auto log = (dir / "results.ndjson").string();
  CHECK(cli({"replay", log, "0"}).code == kExitOk);
  CHECK(cli({"replay", log, "9999"}).code == kExitUsage);
  CHECK(cli({"report", log, "--format", "machine"}).out == slurp(dir / "evidence.json"));
  CHECK(cli({"report", log}).out == slurp(dir / "evidence.txt"));
  CHECK(cli({"report", (dir / "missing.ndjson").string()}).code == kExitUsage);

  const auto bad = scratch("run-defect");
  const auto r = cli({"run", campaign("d_t2.json"), "-o", bad.string(), "--format", "machine", "--parallel", "2"});
  CHECK(r.code == kExitViolations);
  CHECK(fs::exists(bad / "evidence.json"));
  CHECK_FALSE(fs::exists(bad / "evidence.txt"));

  const auto seeded = scratch("run-seed");
  CHECK(cli({"run", campaign("d_t2.json"), "-o", seeded.string(), "--seed-override", "99"}).code == kExitViolations);
  fs::remove_all(dir);
  fs::remove_all(bad);
  fs::remove_all(seeded);
}

TEST_CASE("log level gates chatter but not errors") {
  ::setenv("ISOFORGE_LOG", "info", 1);
  std::ostringstream out, err;
  CHECK(run_cli({"map", "sfr=NOPE"}, out, err) == kExitUsage);
  CHECK(err.str().find("error") != std::string::npos);
  ::setenv("ISOFORGE_LOG", "quiet", 1);
  std::ostringstream out2, err2;
  CHECK(run_cli({"map", "sfr=NOPE"}, out2, err2) == kExitUsage);
  CHECK(err2.str().find("error") != std::string::npos);
}
