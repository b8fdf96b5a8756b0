// specsched: command-line front end for spectral noise-schedule analysis.
//
// Every command writes a run manifest (JSON) next to its primary output. The
// manifest records argv, so `specsched --replay run.manifest.json` re-runs the
// command. Exit codes: 0 success, 2 usage or validation error, 3 runtime or
// numerical error; errors are also reported as one JSON object on stderr.

#include "specsched/core.hpp"
#include "specsched/estimate.hpp"
#include "specsched/io.hpp"
#include "specsched/losses.hpp"
#include "specsched/optimize.hpp"
#include "specsched/schedules.hpp"
#include "specsched/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace specsched;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "1.0.0";

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string manifest_out;
};

// What a command did, for the manifest.
struct RunRecord {
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ValidationError(std::string(what) + ": '" + field + "' is not a number");
    }
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double v : parse_number_list(text, what)) {
    if (v != std::floor(v)) throw ValidationError(std::string(what) + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

// --model FILE or --synthetic d,l,mu.
struct ModelSource {
  std::string model_path;
  std::string synthetic;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model_path, "SpectralModel JSON file");
    cmd->add_option("--synthetic", synthetic, "Synthetic circulant model d,l,mu (e.g. 50,0.1,0.05)");
  }

  SyntheticModel synthetic_model() const {
    const auto p = parse_number_list(synthetic, "--synthetic");
    if (p.size() != 3 || p[0] != std::floor(p[0])) {
      throw ValidationError("--synthetic expects d,l,mu with integer d");
    }
    return synthetic_circulant_model(static_cast<Index>(p[0]), p[1], p[2]);
  }

  SpectralModel load(RunRecord& rec) const {
    if (model_path.empty() == synthetic.empty()) {
      throw ValidationError("give exactly one of --model or --synthetic");
    }
    if (!model_path.empty()) {
      rec.inputs.push_back(model_path);
      return io::read_spectral_model(model_path);
    }
    rec.config["synthetic"] = synthetic;
    return synthetic_model().spectral;
  }
};

json report_json(const OptimizeReport& r) {
  return json{{"initial_loss", r.initial_loss},   {"final_loss", r.final_loss},
              {"iterations", r.iterations},       {"objective_evals", r.objective_evals},
              {"loss_trace", r.loss_trace},       {"converged", r.converged},
              {"stop_reason", r.stop_reason},     {"wall_time_seconds", r.wall_time_seconds}};
}

Endpoints endpoints(double eps0, double epsS) { return Endpoints{eps0, epsS}; }

// "cosine:0,1,1" -> schedule; "linear" -> schedule.
Schedule schedule_from_spec(const std::string& spec, int steps, Endpoints ends) {
  const auto colon = spec.find(':');
  const std::string family = spec.substr(0, colon);
  const std::vector<double> params =
      colon == std::string::npos ? std::vector<double>{}
                                 : parse_number_list(spec.substr(colon + 1), "schedule parameters");
  return make_schedule(family, steps, params, ends);
}

std::string csv_header_and_rows(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += '\n';
  }
  return out;
}

std::string num(double x) { return io::format_double(x); }

void write_matrix(const std::string& path, const MatrixXd& m) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".f64" || ext == ".raw" || ext == ".bin") {
    io::write_raw_f64(path, m);
  } else {
    io::write_csv_matrix(path, m);
  }
}

MatrixXd read_matrix(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  if (ext == ".f64" || ext == ".raw" || ext == ".bin") return io::read_raw_f64(path);
  return io::read_csv_matrix(path);
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string family;
  int steps = 0;
  std::string params;
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;
  std::string out;
};

RunRecord run_gen(const GenArgs& a) {
  RunRecord rec;
  const Schedule s = make_schedule(a.family, a.steps, parse_number_list(a.params, "--params"),
                                   endpoints(a.eps0, a.epsS));
  io::write_json(a.out, io::to_json(s));
  rec.config = {{"family", a.family}, {"steps", a.steps}, {"params", a.params},
                {"eps0", a.eps0},     {"epsS", a.epsS}};
  rec.outputs.push_back(a.out);
  return rec;
}

// ---- optimize --------------------------------------------------------------

struct OptimizeArgs {
  ModelSource model;
  std::string loss = "w2";
  std::string process = "ddim";
  int steps = 0;
  std::string mode = "constrained";
  std::string init = "linear";
  int max_iter = 2000;
  double ftol = 1e-6;
  double gtol = 1e-8;
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;
  long long eigenvalue_index = -1;
  long long pca = 0;
  std::string out;
  std::string report;
};

RunRecord run_optimize(const OptimizeArgs& a, const Globals& g) {
  RunRecord rec;
  SpectralModel model = a.model.load(rec);
  if (a.pca > 0) model = pca_truncate(model, a.pca);

  OptimizeConfig cfg;
  cfg.loss = parse_loss_kind(a.loss);
  cfg.process = parse_process(a.process);
  cfg.steps = a.steps;
  cfg.mode = parse_optimize_mode(a.mode);
  cfg.max_iter = a.max_iter;
  cfg.ftol = a.ftol;
  cfg.gtol = a.gtol;
  cfg.eps0 = a.eps0;
  cfg.epsS = a.epsS;
  if (a.eigenvalue_index >= 0) cfg.single_eigenvalue_index = a.eigenvalue_index;
  if (a.init == "linear") {
    cfg.init = InitSpec::linear();
  } else if (a.init == "cosine") {
    cfg.init = InitSpec::cosine();
  } else if (a.init == "random") {
    cfg.init = InitSpec::uniform_random(g.seed);
  } else if (a.init.rfind("random:", 0) == 0) {
    const auto seed = parse_int_list(a.init.substr(7), "--init random:SEED");
    if (seed.size() != 1 || seed[0] < 0) throw ValidationError("--init random:SEED expects one seed");
    cfg.init = InitSpec::uniform_random(static_cast<std::uint64_t>(seed[0]));
  } else if (a.init.rfind("warm:", 0) == 0) {
    const std::string path = a.init.substr(5);
    rec.inputs.push_back(path);
    cfg.init = InitSpec::warm_start(io::read_schedule(path));
  } else {
    throw ValidationError("--init must be linear, cosine, random[:SEED] or warm:FILE");
  }
  cfg.validate();

  const OptimizeResult result = optimize_schedule(model, cfg);
  io::write_json(a.out, io::to_json(result.schedule));
  const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
  io::write_json(report_path, report_json(result.report));
  std::cerr << "optimize: " << result.report.stop_reason << " after " << result.report.iterations
            << " iterations, loss " << num(result.report.final_loss) << "\n";

  rec.config.update({{"loss", to_string(cfg.loss)},
                     {"process", to_string(cfg.process)},
                     {"steps", cfg.steps},
                     {"mode", to_string(cfg.mode)},
                     {"init", a.init},
                     {"max_iter", cfg.max_iter},
                     {"ftol", cfg.ftol},
                     {"gtol", cfg.gtol},
                     {"eps0", cfg.eps0},
                     {"epsS", cfg.epsS},
                     {"eigenvalue_index", a.eigenvalue_index},
                     {"pca", a.pca}});
  rec.outputs = {a.out, report_path};
  return rec;
}

// ---- eval / compare --------------------------------------------------------

struct EvalArgs {
  ModelSource model;
  std::vector<std::string> schedules;
  std::string losses = "w2";
  std::string processes = "ddim";
  bool root = false;
  std::string out;
};

double reported_value(double loss, LossKind kind, bool root) {
  return root && kind == LossKind::wasserstein2 ? std::sqrt(loss) : loss;
}

RunRecord run_eval(const EvalArgs& a) {
  RunRecord rec;
  const SpectralModel model = a.model.load(rec);
  std::vector<std::vector<std::string>> rows;
  for (const auto& path : a.schedules) {
    rec.inputs.push_back(path);
    const Schedule s = io::read_schedule(path);
    for (const auto& p : split(a.processes, ',')) {
      for (const auto& l : split(a.losses, ',')) {
        const LossKind kind = parse_loss_kind(l);
        const double v = schedule_loss(model, s, kind, parse_process(p));
        rows.push_back({std::to_string(s.steps()), s.kind, path, p, to_string(kind),
                        num(reported_value(v, kind, a.root))});
      }
    }
  }
  io::write_text_atomic(
      a.out, csv_header_and_rows({"steps", "schedule", "file", "process", "loss_kind", "value"}, rows));
  rec.config = {{"losses", a.losses}, {"processes", a.processes}, {"root", a.root}};
  rec.outputs.push_back(a.out);
  return rec;
}

struct CompareArgs {
  ModelSource model;
  std::vector<std::string> families = {"linear",        "cosine:0,1,1",   "cosine:0,0.5,1",
                                       "sigmoid:-3,3,1", "sigmoid:0,3,0.7", "edm:7,0.002,80"};
  std::string steps_list = "10,28,60,112";
  std::string losses = "w2";
  std::string processes = "ddim";
  bool no_optimize = false;
  double ftol = 1e-6;
  bool root = false;
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;
  std::string out;
};

RunRecord run_compare(const CompareArgs& a) {
  RunRecord rec;
  const SpectralModel model = a.model.load(rec);
  const Endpoints ends = endpoints(a.eps0, a.epsS);
  std::vector<std::vector<std::string>> rows;
  for (int steps : parse_int_list(a.steps_list, "--steps-list")) {
    for (const auto& p : split(a.processes, ',')) {
      const Process process = parse_process(p);
      for (const auto& l : split(a.losses, ',')) {
        const LossKind kind = parse_loss_kind(l);
        for (const auto& spec : a.families) {
          const Schedule s = schedule_from_spec(spec, steps, ends);
          const double v = schedule_loss(model, s, kind, process);
          rows.push_back({std::to_string(steps), s.kind, p, to_string(kind),
                          num(reported_value(v, kind, a.root))});
        }
        if (!a.no_optimize) {
          OptimizeConfig cfg;
          cfg.loss = kind;
          cfg.process = process;
          cfg.steps = steps;
          cfg.eps0 = a.eps0;
          cfg.epsS = a.epsS;
          cfg.ftol = a.ftol;
          const auto result = optimize_schedule(model, cfg);
          rows.push_back({std::to_string(steps), result.schedule.kind, p, to_string(kind),
                          num(reported_value(result.report.final_loss, kind, a.root))});
        }
      }
    }
  }
  io::write_text_atomic(a.out,
                        csv_header_and_rows({"steps", "schedule", "process", "loss_kind", "value"}, rows));
  rec.config = {{"families", a.families}, {"steps_list", a.steps_list}, {"losses", a.losses},
                {"processes", a.processes}, {"optimize", !a.no_optimize}, {"ftol", a.ftol},
                {"root", a.root}, {"eps0", a.eps0}, {"epsS", a.epsS}};
  rec.outputs.push_back(a.out);
  return rec;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
  ModelSource model;
  std::string covariance;
  std::string mean;
  std::string schedule;
  std::string process = "ddim";
  long long samples = 1000;
  std::string out;
  std::string moments_out;
};

RunRecord run_simulate(const SimulateArgs& a, const Globals& g) {
  RunRecord rec;
  DenseGaussian target;
  if (!a.covariance.empty()) {
    if (!a.model.model_path.empty() || !a.model.synthetic.empty()) {
      throw ValidationError("give only one of --covariance, --model or --synthetic");
    }
    rec.inputs.push_back(a.covariance);
    target.covariance = read_matrix(a.covariance);
    if (!a.mean.empty()) {
      rec.inputs.push_back(a.mean);
      const MatrixXd m = read_matrix(a.mean);
      if (m.size() != target.covariance.rows()) throw ValidationError("--mean has the wrong length");
      target.mean = Eigen::Map<const VectorXd>(m.data(), m.size());
    } else {
      target.mean = VectorXd::Zero(target.covariance.rows());
    }
  } else if (!a.model.synthetic.empty() && a.model.model_path.empty()) {
    rec.config["synthetic"] = a.model.synthetic;
    target = a.model.synthetic_model().dense;
  } else {
    // A bare spectral model is simulated in its own eigenbasis.
    const SpectralModel m = a.model.load(rec);
    target.covariance = m.eigenvalues.asDiagonal();
    target.mean = m.mean_spectral;
  }
  rec.inputs.push_back(a.schedule);

  SimConfig cfg;
  cfg.process = parse_process(a.process);
  cfg.samples = a.samples;
  cfg.seed = g.seed;
  cfg.schedule = io::read_schedule(a.schedule);
  cfg.threads = g.threads;
  const MatrixXd samples = simulate_reverse(target, cfg);
  write_matrix(a.out, samples);
  rec.outputs.push_back(a.out);
  if (!a.moments_out.empty()) {
    const DenseGaussian m = empirical_moments(samples);
    write_matrix(a.moments_out, m.covariance);
    rec.outputs.push_back(a.moments_out);
  }
  rec.config.update({{"process", a.process}, {"samples", a.samples}});
  return rec;
}

// ---- dynamics / bias -------------------------------------------------------

struct DynamicsArgs {
  ModelSource model;
  std::string schedule;
  std::string out;
  std::string w2_out;
};

RunRecord run_dynamics(const DynamicsArgs& a) {
  RunRecord rec;
  const SpectralModel model = a.model.load(rec);
  rec.inputs.push_back(a.schedule);
  const Schedule s = io::read_schedule(a.schedule);
  const MatrixXd rel = relative_error_dynamics(model, s);
  std::vector<std::string> header{"step"};
  for (Index i = 0; i < model.dim(); ++i) header.push_back("coord" + std::to_string(i));
  std::vector<std::vector<std::string>> rows;
  for (Index l = 0; l < rel.rows(); ++l) {
    std::vector<std::string> row{std::to_string(l)};
    for (Index i = 0; i < rel.cols(); ++i) row.push_back(num(rel(l, i)));
    rows.push_back(std::move(row));
  }
  io::write_text_atomic(a.out, csv_header_and_rows(header, rows));
  rec.outputs.push_back(a.out);
  if (!a.w2_out.empty()) {
    const VectorXd w2 = w2_dynamics(model, s);
    std::vector<std::vector<std::string>> wrows;
    for (Index l = 0; l < w2.size(); ++l) wrows.push_back({std::to_string(l), num(w2[l])});
    io::write_text_atomic(a.w2_out, csv_header_and_rows({"step", "w2_squared"}, wrows));
    rec.outputs.push_back(a.w2_out);
  }
  return rec;
}

struct BiasArgs {
  ModelSource model;
  std::string schedule;
  std::string family = "cosine:0,0.5,1";
  std::string steps_list = "10,50,100,500,1000";
  std::string process = "ddim";
  std::string out;
};

RunRecord run_bias(const BiasArgs& a) {
  RunRecord rec;
  const SpectralModel model = a.model.load(rec);
  const Process process = parse_process(a.process);
  std::vector<Schedule> schedules;
  if (!a.schedule.empty()) {
    rec.inputs.push_back(a.schedule);
    schedules.push_back(io::read_schedule(a.schedule));
  } else {
    for (int steps : parse_int_list(a.steps_list, "--steps-list")) {
      schedules.push_back(schedule_from_spec(a.family, steps, Endpoints{}));
    }
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& s : schedules) {
    const Transfer t = process == Process::ddim ? ddim_transfer(model, s) : ddpm_transfer(model, s);
    const MeanBias b = mean_bias(t, model);
    rows.push_back({std::to_string(s.steps()), s.kind, num(b.d2_gap.maxCoeff()),
                    num(b.bias.cwiseAbs().maxCoeff()), num(b.bias.norm())});
  }
  io::write_text_atomic(a.out, csv_header_and_rows({"steps", "schedule", "max_abs_d2_minus_1",
                                                    "max_abs_bias", "bias_norm"},
                                                   rows));
  rec.config = {{"family", a.family}, {"steps_list", a.steps_list}, {"process", a.process}};
  rec.outputs.push_back(a.out);
  return rec;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string input;
  std::string synthetic;
  long long window = 400;
  long long stride = 0;
  double th = 0.05;
  std::string structure = "circulant";
  bool rows = false;
  long long pca = 0;
  std::string out_model;
  std::string out_cov;
};

RunRecord run_estimate(const EstimateArgs& a) {
  RunRecord rec;
  if (a.input.empty() == a.synthetic.empty()) {
    throw ValidationError("give exactly one of --input or --synthetic");
  }
  SpectralModel model;
  MatrixXd covariance;
  if (!a.synthetic.empty()) {
    ModelSource src;
    src.synthetic = a.synthetic;
    const SyntheticModel syn = src.synthetic_model();
    model = syn.spectral;
    covariance = syn.dense.covariance;
    rec.config["synthetic"] = a.synthetic;
  } else {
    rec.inputs.push_back(a.input);
    EstimationConfig cfg;
    cfg.window = a.window;
    cfg.stride = a.stride;
    cfg.silence_threshold = a.th;
    cfg.structure = parse_structure(a.structure);
    const auto ext = fs::path(a.input).extension().string();
    CovarianceEstimate est;
    if (ext == ".wav") {
      est = sliding_window_covariance(io::read_wav_pcm16(a.input).samples, cfg);
    } else {
      const MatrixXd data = read_matrix(a.input);
      if (a.rows) {
        est = row_covariance(data, cfg);
      } else {
        if (data.cols() != 1) {
          throw ValidationError("stream input must have one column (use --rows for vectors)");
        }
        est = sliding_window_covariance(std::vector<double>(data.data(), data.data() + data.size()), cfg);
      }
    }
    const SpectralEstimate spec = spectral_model_from_covariance(est, cfg.structure);
    model = spec.model;
    covariance = est.covariance;
    std::cerr << "estimate: " << est.windows_used << " windows used, " << est.windows_rejected
              << " rejected, " << spec.floored << " eigenvalues floored\n";
    rec.config.update({{"window", a.window}, {"stride", cfg.effective_stride()}, {"th", a.th},
                       {"structure", a.structure}, {"rows", a.rows},
                       {"windows_used", est.windows_used},
                       {"windows_rejected", est.windows_rejected},
                       {"eigenvalues_floored", spec.floored}});
  }
  if (a.pca > 0) model = pca_truncate(model, a.pca);
  rec.config["pca"] = a.pca;
  io::write_json(a.out_model, io::to_json(model));
  rec.outputs.push_back(a.out_model);
  if (!a.out_cov.empty()) {
    write_matrix(a.out_cov, covariance);
    rec.outputs.push_back(a.out_cov);
  }
  return rec;
}

// ---- convert ---------------------------------------------------------------

struct ConvertArgs {
  std::string input;
  std::string to;
  std::string out;
};

RunRecord run_convert(const ConvertArgs& a) {
  RunRecord rec;
  rec.inputs.push_back(a.input);
  const json j = io::read_json(a.input);
  if (a.to == "ve") {
    io::write_json(a.out, io::to_json(vp_to_ve(io::schedule_from_json(j))));
  } else if (a.to == "vp") {
    io::write_json(a.out, io::to_json(ve_to_vp(io::ve_schedule_from_json(j))));
  } else {
    throw ValidationError("--to must be ve or vp");
  }
  rec.config = {{"to", a.to}};
  rec.outputs.push_back(a.out);
  return rec;
}

void emit_error(const char* kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  // --replay MANIFEST re-runs the argv recorded in a manifest.
  if (args.size() == 2 && args[0] == "--replay") {
    const json manifest = io::read_json(args[1]);
    if (!manifest.contains("argv") || !manifest["argv"].is_array()) {
      throw ValidationError("manifest has no argv array");
    }
    args = manifest["argv"].get<std::vector<std::string>>();
  }
  const std::vector<std::string> recorded = args;

  CLI::App app{"Spectral analysis and optimization of diffusion noise schedules"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_option("--manifest-out", g.manifest_out, "Run manifest path (default: <output>.manifest.json)");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a baseline schedule");
  c_gen->add_option("--family", gen.family, "linear|uniform|cosine|sigmoid|edm")->required();
  c_gen->add_option("--steps", gen.steps, "Number of steps S")->required();
  c_gen->add_option("--params", gen.params, "Comma-separated family parameters");
  c_gen->add_option("--eps0", gen.eps0)->capture_default_str();
  c_gen->add_option("--epsS", gen.epsS)->capture_default_str();
  c_gen->add_option("--out", gen.out, "Schedule JSON")->required();

  OptimizeArgs opt;
  auto* c_opt = app.add_subcommand("optimize", "Optimize a schedule for a spectral model");
  opt.model.add_to(c_opt);
  c_opt->add_option("--loss", opt.loss, "w2|kl|wl1")->capture_default_str();
  c_opt->add_option("--process", opt.process, "ddim|ddpm")->capture_default_str();
  c_opt->add_option("--steps", opt.steps)->required();
  c_opt->add_option("--mode", opt.mode, "constrained|free")->capture_default_str();
  c_opt->add_option("--init", opt.init, "linear|cosine|random[:SEED]|warm:FILE")->capture_default_str();
  c_opt->add_option("--max-iter", opt.max_iter)->capture_default_str();
  c_opt->add_option("--ftol", opt.ftol)->capture_default_str();
  c_opt->add_option("--gtol", opt.gtol)->capture_default_str();
  c_opt->add_option("--eps0", opt.eps0)->capture_default_str();
  c_opt->add_option("--epsS", opt.epsS)->capture_default_str();
  c_opt->add_option("--eigenvalue-index", opt.eigenvalue_index, "Optimize for one eigenvalue only");
  c_opt->add_option("--pca", opt.pca, "Keep only the largest K eigenvalues");
  c_opt->add_option("--out", opt.out, "Schedule JSON")->required();
  c_opt->add_option("--report", opt.report, "Report JSON (default: <out>.report.json)");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate losses of schedule files");
  ev.model.add_to(c_eval);
  c_eval->add_option("--schedules", ev.schedules, "Schedule JSON files")->required();
  c_eval->add_option("--losses", ev.losses, "Comma-separated loss kinds")->capture_default_str();
  c_eval->add_option("--processes", ev.processes, "Comma-separated processes")->capture_default_str();
  c_eval->add_flag("--root", ev.root, "Report W2 as a distance instead of its square");
  c_eval->add_option("--out", ev.out, "Results CSV")->required();

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Compare baselines and optimized schedules");
  cmp.model.add_to(c_cmp);
  c_cmp->add_option("--families", cmp.families, "Schedule specs such as cosine:0,1,1")->capture_default_str();
  c_cmp->add_option("--steps-list", cmp.steps_list)->capture_default_str();
  c_cmp->add_option("--losses", cmp.losses)->capture_default_str();
  c_cmp->add_option("--processes", cmp.processes)->capture_default_str();
  c_cmp->add_flag("--no-optimize", cmp.no_optimize, "Skip the optimized schedule");
  c_cmp->add_option("--ftol", cmp.ftol)->capture_default_str();
  c_cmp->add_flag("--root", cmp.root, "Report W2 as a distance instead of its square");
  c_cmp->add_option("--eps0", cmp.eps0)->capture_default_str();
  c_cmp->add_option("--epsS", cmp.epsS)->capture_default_str();
  c_cmp->add_option("--out", cmp.out, "Results CSV")->required();

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo reverse process with the Wiener denoiser");
  sim.model.add_to(c_sim);
  c_sim->add_option("--covariance", sim.covariance, "Dense covariance (CSV or .f64)");
  c_sim->add_option("--mean", sim.mean, "Mean vector (CSV or .f64)");
  c_sim->add_option("--schedule", sim.schedule)->required();
  c_sim->add_option("--process", sim.process)->capture_default_str();
  c_sim->add_option("--samples", sim.samples)->capture_default_str();
  c_sim->add_option("--out", sim.out, "Samples (.f64 raw + sidecar, or CSV)")->required();
  c_sim->add_option("--moments-out", sim.moments_out, "Empirical covariance (CSV or .f64)");

  DynamicsArgs dyn;
  auto* c_dyn = app.add_subcommand("dynamics", "Per-step relative error and W2 dynamics");
  dyn.model.add_to(c_dyn);
  c_dyn->add_option("--schedule", dyn.schedule)->required();
  c_dyn->add_option("--out", dyn.out, "Relative-error CSV")->required();
  c_dyn->add_option("--w2-out", dyn.w2_out, "W2 dynamics CSV");

  BiasArgs bias;
  auto* c_bias = app.add_subcommand("bias", "Mean bias of the generated distribution");
  bias.model.add_to(c_bias);
  c_bias->add_option("--schedule", bias.schedule, "Single schedule file");
  c_bias->add_option("--family", bias.family)->capture_default_str();
  c_bias->add_option("--steps-list", bias.steps_list)->capture_default_str();
  c_bias->add_option("--process", bias.process)->capture_default_str();
  c_bias->add_option("--out", bias.out, "Results CSV")->required();

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "Estimate a spectral model from data");
  c_est->add_option("--input", est.input, "WAV, CSV or .f64 input");
  c_est->add_option("--synthetic", est.synthetic, "Synthetic circulant model d,l,mu");
  c_est->add_option("--window", est.window)->capture_default_str();
  c_est->add_option("--stride", est.stride, "Default: window length");
  c_est->add_option("--th", est.th, "Silence threshold")->capture_default_str();
  c_est->add_option("--structure", est.structure, "circulant|symmetric")->capture_default_str();
  c_est->add_flag("--rows", est.rows, "Treat each input row as one observation vector");
  c_est->add_option("--pca", est.pca, "Keep only the largest K eigenvalues");
  c_est->add_option("--out-model", est.out_model, "SpectralModel JSON")->required();
  c_est->add_option("--out-cov", est.out_cov, "Covariance (CSV or .f64)");

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand("convert", "Convert between VP and VE schedules");
  c_conv->add_option("--input", conv.input)->required();
  c_conv->add_option("--to", conv.to, "ve|vp")->required();
  c_conv->add_option("--out", conv.out)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  RunRecord rec;
  std::string command;
  if (c_gen->parsed()) {
    command = "gen";
    rec = run_gen(gen);
  } else if (c_opt->parsed()) {
    command = "optimize";
    rec = run_optimize(opt, g);
  } else if (c_eval->parsed()) {
    command = "eval";
    rec = run_eval(ev);
  } else if (c_cmp->parsed()) {
    command = "compare";
    rec = run_compare(cmp);
  } else if (c_sim->parsed()) {
    command = "simulate";
    rec = run_simulate(sim, g);
  } else if (c_dyn->parsed()) {
    command = "dynamics";
    rec = run_dynamics(dyn);
  } else if (c_bias->parsed()) {
    command = "bias";
    rec = run_bias(bias);
  } else if (c_est->parsed()) {
    command = "estimate";
    rec = run_estimate(est);
  } else {
    command = "convert";
    rec = run_convert(conv);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  const json manifest{{"command", command},     {"argv", recorded},
                      {"config", rec.config},   {"inputs", rec.inputs},
                      {"outputs", rec.outputs}, {"seed", g.seed},
                      {"threads", g.threads},   {"tool_version", kToolVersion},
                      {"wall_time_seconds", wall}};
  const std::string manifest_path =
      g.manifest_out.empty() ? rec.outputs.front() + ".manifest.json" : g.manifest_out;
  io::write_json(manifest_path, manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ValidationError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const NumericalError& e) {
    emit_error("numerical", e.what());
    return 3;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 3;
  }
}
