// End-to-end tests of the specsched command-line tool. Each case shells out
// to the real binary inside a scratch directory and inspects its outputs.

#include "specsched/io.hpp"
#include "specsched/schedules.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specsched;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::current_path() / "cli_scratch";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" SPECSCHED_CLI_PATH "' " + args +
                          " > last_stdout.txt 2> last_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(workdir() / p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool exists(const fs::path& p) { return fs::exists(workdir() / p); }

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("gen writes a valid schedule and a manifest") {
  REQUIRE(run("gen --family cosine --steps 28 --params 0,1,1 --out cos28.json") == 0);
  const Schedule s = io::read_schedule(workdir() / "cos28.json");
  CHECK(s.steps() == 28);
  CHECK((s.alpha_bar - cosine_schedule(28, 0, 1, 1).alpha_bar).cwiseAbs().maxCoeff() == 0.0);
  const json m = io::read_json(workdir() / "cos28.json.manifest.json");
  CHECK(m["command"] == "gen");
  CHECK(m.contains("argv"));
  CHECK(m.contains("seed"));
  CHECK(m.contains("tool_version"));
  CHECK(m.contains("wall_time_seconds"));
}

TEST_CASE("invalid input exits with code 2, a JSON error, and no output file") {
  CHECK(run("gen --family cosine --steps 10 --params 0,1,0 --out bad.json") == 2);
  CHECK_FALSE(exists("bad.json"));
  const json err = json::parse(slurp("last_stderr.txt"));
  CHECK(err["error"]["kind"].is_string());
  CHECK(err["error"]["message"].is_string());

  CHECK(run("optimize --synthetic 8,0.1,0.05 --steps 1 --out bad_opt.json") == 2);
  CHECK_FALSE(exists("bad_opt.json"));
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("eval --schedules missing.json --synthetic 8,0.1,0.05 --out e.csv") == 2);
}

TEST_CASE("optimize produces a converged schedule and report; replay is byte-identical") {
  REQUIRE(run("optimize --synthetic 50,0.1,0.05 --loss w2 --steps 28 --out opt28.json") == 0);
  const json report = io::read_json(workdir() / "opt28.json.report.json");
  CHECK(report["converged"] == true);
  CHECK(report["final_loss"].get<double>() <= report["initial_loss"].get<double>());
  CHECK_NOTHROW(io::read_schedule(workdir() / "opt28.json").validate());

  const std::string first = slurp("opt28.json");
  fs::remove(workdir() / "opt28.json");
  REQUIRE(run("--replay opt28.json.manifest.json") == 0);
  CHECK(slurp("opt28.json") == first);
}

TEST_CASE("optimize with warm start and random init") {
  REQUIRE(run("optimize --synthetic 20,0.1,0.05 --steps 10 --out w10.json") == 0);
  REQUIRE(run("optimize --synthetic 20,0.1,0.05 --steps 30 --init warm:w10.json --out w30.json") == 0);
  REQUIRE(run("optimize --synthetic 20,0.1,0.05 --steps 30 --init random:4 --loss kl --out r30.json") == 0);
  CHECK(io::read_schedule(workdir() / "w30.json").steps() == 30);
  CHECK(run("optimize --synthetic 20,0.1,0.05 --steps 30 --init sideways --out x.json") == 2);
}

TEST_CASE("eval and compare tables") {
  REQUIRE(run("gen --family linear --steps 12 --out lin12.json") == 0);
  REQUIRE(run("eval --schedules lin12.json --synthetic 50,0.1,0.05 --losses w2,kl --processes ddim,ddpm "
              "--out eval.csv") == 0);
  const std::string eval = slurp("eval.csv");
  CHECK(eval.rfind("steps,schedule,file,process,loss_kind,value", 0) == 0);
  CHECK(count_lines(eval) == 5);

  REQUIRE(run("compare --synthetic 50,0.1,0.05 --out compare.csv") == 0);
  const std::string table = slurp("compare.csv");
  CHECK(table.rfind("steps,schedule,process,loss_kind,value", 0) == 0);
  CHECK(count_lines(table) >= 25);  // header + 4 step counts x (6 baselines + optimized)
}

TEST_CASE("simulate is reproducible for a fixed seed") {
  REQUIRE(run("gen --family cosine --steps 20 --out c20.json") == 0);
  REQUIRE(run("--seed 9 simulate --synthetic 16,0.1,0.05 --schedule c20.json --samples 300 --out a.f64") == 0);
  REQUIRE(run("--seed 9 --threads 3 simulate --synthetic 16,0.1,0.05 --schedule c20.json --samples 300 "
              "--out b.f64") == 0);
  CHECK(slurp("a.f64") == slurp("b.f64"));
  CHECK(slurp("a.f64").size() == 300 * 16 * sizeof(double));
  const json side = io::read_json(workdir() / "a.f64.json");
  CHECK(side["dim"] == 16);
  CHECK(side["count"] == 300);

  REQUIRE(run("--seed 9 simulate --synthetic 16,0.1,0.05 --schedule c20.json --samples 300 --process ddpm "
              "--out p.csv --moments-out p_cov.csv") == 0);
  CHECK(io::read_csv_matrix(workdir() / "p_cov.csv").rows() == 16);
}

TEST_CASE("dynamics and bias tables") {
  REQUIRE(run("gen --family cosine --steps 60 --out c60.json") == 0);
  REQUIRE(run("dynamics --synthetic 50,0.1,0.05 --schedule c60.json --out dyn.csv --w2-out w2.csv") == 0);
  CHECK(count_lines(slurp("dyn.csv")) == 62);
  CHECK(slurp("dyn.csv").rfind("step,", 0) == 0);
  CHECK(exists("w2.csv"));

  REQUIRE(run("bias --synthetic 50,0.1,0.05 --family cosine:0,0.5,1 --steps-list 10,50,100 --out bias.csv") == 0);
  const std::string bias = slurp("bias.csv");
  CHECK(bias.rfind("steps,schedule,max_abs_d2_minus_1,max_abs_bias,bias_norm", 0) == 0);
  CHECK(count_lines(bias) == 4);
}

TEST_CASE("estimate from a WAV file and from a synthetic model") {
  std::vector<double> samples(8000);
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i] = 0.4 * std::sin(0.07 * static_cast<double>(i)) + 0.2 * std::sin(0.31 * static_cast<double>(i));
  }
  std::fill(samples.begin(), samples.begin() + 400, 0.0);  // one silent window
  io::write_wav_pcm16(workdir() / "tone.wav", samples, 16000);
  REQUIRE(run("estimate --input tone.wav --window 400 --th 0.05 --out-model tone_model.json "
              "--out-cov tone_cov.csv") == 0);
  const SpectralModel m = io::read_spectral_model(workdir() / "tone_model.json");
  CHECK(m.dim() == 400);
  CHECK(io::read_csv_matrix(workdir() / "tone_cov.csv").rows() == 400);

  REQUIRE(run("estimate --synthetic 12,0.1,0.05 --structure symmetric --pca 4 --out-model syn.json") == 0);
  CHECK(io::read_spectral_model(workdir() / "syn.json").dim() == 4);
  CHECK(run("estimate --out-model none.json") == 2);
}

TEST_CASE("convert round trip") {
  REQUIRE(run("gen --family sigmoid --steps 15 --out sig.json") == 0);
  REQUIRE(run("convert --input sig.json --to ve --out sig_ve.json") == 0);
  REQUIRE(run("convert --input sig_ve.json --to vp --out sig_back.json") == 0);
  const Schedule a = io::read_schedule(workdir() / "sig.json");
  const Schedule b = io::read_schedule(workdir() / "sig_back.json");
  CHECK((a.alpha_bar - b.alpha_bar).cwiseAbs().maxCoeff() <= 1e-12);
}
