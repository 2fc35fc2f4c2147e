#include "support.hpp"

#include "vifi/app.hpp"
#include "vifi/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <initializer_list>
#include <sstream>
#include <vector>

using namespace vifi;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::initializer_list<std::string> args) {
  std::vector<std::string> words{"vifi"};
  words.insert(words.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const std::string& w : words) argv.push_back(w.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// Value printed on the "name value" line of a metrics block.
double metric(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string key;
  double v = 0;
  while (in >> key) {
    if (key == name && in >> v) return v;
  }
  FAIL("metric " << name << " missing");
  return 0;
}

ImageGrid depth_ramp() {
  ImageGrid g(6, 7, 1);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = 1.0 + 0.5 * static_cast<double>(i);
  return g;
}

ImageGrid times(ImageGrid g, double c) {
  g.data() *= c;
  return g;
}

std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("eval closed forms") {
  const auto dir = test::scratch_dir("cli_eval");
  const ImageGrid gt = depth_ramp();
  write_pfm(dir / "gt.pfm", gt);
  write_pfm(dir / "twice.pfm", times(gt, 2.0));
  write_pfm(dir / "more.pfm", times(gt, 1.2));
  const std::string g = (dir / "gt.pfm").string();

  const Run same = run({"eval", g, g});
  REQUIRE(same.code == 0);
  CHECK(same.out == "abs_rel 0.000\nsq_rel 0.000\nrmse 0.000\nrmse_log 0.000\n"
                    "delta1 1.000\ndelta2 1.000\ndelta3 1.000\n");

  const Run scaled = run({"eval", (dir / "twice.pfm").string(), g, "--median-scale"});
  REQUIRE(scaled.code == 0);
  CHECK(scaled.out == same.out);

  const Run more = run({"eval", (dir / "more.pfm").string(), g});
  REQUIRE(more.code == 0);
  CHECK(metric(more.out, "abs_rel") == 0.2);
  CHECK(metric(more.out, "delta1") == 1.0);

  const Run far = run({"eval", (dir / "twice.pfm").string(), g});
  CHECK(metric(far.out, "abs_rel") == 1.0);
  CHECK(metric(far.out, "delta3") == 0.0);  // 2 > 1.25^3
  CHECK(metric(far.out, "delta1") == 0.0);
}

TEST_CASE("synth is deterministic and job-count invariant") {
  const auto a = test::scratch_dir("cli_synth_a");
  const auto b = test::scratch_dir("cli_synth_b");
  REQUIRE(run({"synth", "--out", a.string(), "--set", "seed=5"}).code == 0);
  REQUIRE(run({"synth", "--out", b.string(), "--set", "seed=5", "--jobs", "3"}).code == 0);
  int files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(a)) {
    CHECK(test::file_bytes(entry.path()) == test::file_bytes(b / entry.path().filename()));
    ++files;
  }
  CHECK(files == 5 + 5 + 6 + 3 + 3 + 1);
  CHECK(read_bundle(a).images.size() == 5);
}

TEST_CASE("optimize writes a consistent loss curve and reruns byte-identically") {
  const auto a = test::scratch_dir("cli_opt_a");
  const auto b = test::scratch_dir("cli_opt_b");
  const Run first = run({"optimize", "--out", a.string(), "--set", "max_iters=15"});
  REQUIRE(first.code == 0);
  REQUIRE(run({"optimize", "--out", b.string(), "--set", "max_iters=15", "--jobs", "2"}).code == 0);
  for (const char* name : {"loss.csv", "metrics.txt", "depth.pfm", "abs_rel.pfm"}) {
    CHECK(test::file_bytes(a / name) == test::file_bytes(b / name));
  }

  const std::string csv = read_text(a / "loss.csv");
  CHECK(csv.rfind("iter,total,pe,sm,sv,sa,sa_m\n", 0) == 0);
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 16);
  const RunConfig cfg;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    REQUIRE(r.size() == 7);
    CHECK(r[0] == static_cast<double>(i));
    const double sum = r[2] + cfg.gamma * r[3] + cfg.lambda * (r[4] + r[5] + r[6]);
    CHECK(std::abs(r[1] - sum) <= 1e-9 * std::max(1.0, std::abs(r[1])));
  }
  CHECK(first.out.find("status completed\niterations 15\n") == 0);
  CHECK(read_pfm(a / "depth.pfm").height() == cfg.height);
}

TEST_CASE("optimize reads a bundle from disk") {
  const auto bundle = test::scratch_dir("cli_opt_bundle");
  const auto out = test::scratch_dir("cli_opt_from_disk");
  REQUIRE(run({"synth", "--out", bundle.string()}).code == 0);
  const Run r = run({"optimize", "--bundle", bundle.string(), "--out", out.string(), "--set", "max_iters=3"});
  CHECK(r.code == 0);
  CHECK(std::filesystem::exists(out / "loss.csv"));
}

TEST_CASE("fuse-demo on a static camera reports the exact-match sentinel") {
  const auto dir = test::scratch_dir("cli_fuse");
  const Run r = run({"fuse-demo", "--out", dir.string(), "--set", "step_tx=0", "--set", "step_ty=0",
                     "--set", "step_tz=0", "--set", "step_ry=0"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("0,1,2  99.00") != std::string::npos);
  CHECK(r.out.find("octaves S = 10") != std::string::npos);
  CHECK(r.out.find("3 + 42 = 45") != std::string::npos);
  CHECK(read_text(dir / "fuse_report.txt") == r.out);
  CHECK(std::filesystem::exists(dir / "interp_2.ppm"));
  CHECK(std::filesystem::exists(dir / "gt_3.ppm"));
}

TEST_CASE("augcheck") {
  const Run r = run({"augcheck"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("R_c for f_s=2 theta_deg=0") != std::string::npos);
}

TEST_CASE("exit codes") {
  const auto dir = test::scratch_dir("cli_codes");
  CHECK(run({}).code == 1);
  CHECK(run({"teleport"}).code == 1);
  CHECK(run({"--help"}).code == 0);

  const Run unknown = run({"synth", "--out", dir.string(), "--set", "bogus=1"});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("'bogus'") != std::string::npos);
  CHECK(run({"synth", "--out", dir.string(), "--set", "lambda=-1"}).code == 1);
  CHECK(run({"synth", "--jobs", "0"}).code == 1);
  CHECK(run({"eval", "a.pfm", "b.pfm", "--cap", "0.05"}).code == 1);

  CHECK(run({"eval", (dir / "missing.pfm").string(), (dir / "missing.pfm").string()}).code == 3);
  CHECK(run({"synth", "--config", (dir / "missing.cfg").string()}).code == 3);

  const Run flipped = run({"gradcheck", "--inject-sign-flip", "--set", "gradcheck_samples=5"});
  CHECK(flipped.code == 2);
  CHECK(flipped.out.find("15 ops checked, 15 failed") != std::string::npos);
  const Run honest = run({"gradcheck", "--set", "gradcheck_samples=5"});
  CHECK(honest.code == 0);
  CHECK(honest.out.find("15 ops checked, 0 failed") != std::string::npos);
}

TEST_CASE("configuration precedence") {
  const auto dir = test::scratch_dir("cli_precedence");
  write_text(dir / "run.cfg", "seed = 4\nout_dir = " + (dir / "from_file").string() + "\n");
  const std::string cfg = (dir / "run.cfg").string();

  REQUIRE(run({"synth", "--config", cfg}).code == 0);
  CHECK(std::filesystem::exists(dir / "from_file" / "manifest.txt"));
  REQUIRE(run({"synth", "--config", cfg, "--set", "seed=9", "--out", (dir / "flag").string()}).code == 0);
  REQUIRE(run({"synth", "--set", "seed=9", "--out", (dir / "nine").string()}).code == 0);
  CHECK(test::file_bytes(dir / "flag" / "frame_0.ppm") == test::file_bytes(dir / "nine" / "frame_0.ppm"));
  CHECK(test::file_bytes(dir / "flag" / "frame_0.ppm") != test::file_bytes(dir / "from_file" / "frame_0.ppm"));

  ::setenv("VIFI_SEED", "9", 1);
  const int env_run = run({"synth", "--config", cfg, "--out", (dir / "env").string()}).code;
  const int env_then_set = run({"synth", "--set", "seed=4", "--out", (dir / "env_set").string()}).code;
  ::unsetenv("VIFI_SEED");
  REQUIRE(env_run == 0);
  REQUIRE(env_then_set == 0);
  CHECK(test::file_bytes(dir / "env" / "frame_0.ppm") == test::file_bytes(dir / "nine" / "frame_0.ppm"));
  CHECK(test::file_bytes(dir / "env_set" / "frame_0.ppm") ==
        test::file_bytes(dir / "from_file" / "frame_0.ppm"));
}

}
