#include "specsched/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace specsched::io {

using nlohmann::json;
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "raw float64 and WAV I/O assume a little-endian host");

std::string format_double(double x) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw NumericalError("format_double: conversion failed");
  return std::string(buf.data(), ptr);
}

namespace {

json vector_json(const VectorXd& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void check_fields(const json& j, const std::set<std::string>& fields, const char* what) {
  if (!j.is_object()) throw ValidationError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!fields.count(key)) {
      throw ValidationError(std::string(what) + ": unknown field '" + key + "'");
    }
  }
  for (const auto& f : fields) {
    if (!j.contains(f)) throw ValidationError(std::string(what) + ": missing field '" + f + "'");
  }
}

double number_field(const json& j, const char* key, const char* what) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ValidationError(std::string(what) + ": '" + key + "' must be a number");
  return v.get<double>();
}

long long integer_field(const json& j, const char* key, const char* what) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw ValidationError(std::string(what) + ": '" + key + "' must be an integer");
  }
  return v.get<long long>();
}

std::string string_field(const json& j, const char* key, const char* what) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ValidationError(std::string(what) + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

VectorXd vector_field(const json& j, const char* key, const char* what) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ValidationError(std::string(what) + ": '" + key + "' must be an array");
  VectorXd out(static_cast<Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw ValidationError(std::string(what) + ": '" + key + "' must contain numbers");
    }
    out[static_cast<Index>(i)] = v[i].get<double>();
  }
  return out;
}

}  // namespace

json to_json(const SpectralModel& model) {
  return json{{"dim", model.dim()},
              {"eigenvalues", vector_json(model.eigenvalues)},
              {"mean_spectral", vector_json(model.mean_spectral)},
              {"source", model.source}};
}

json to_json(const Schedule& schedule) {
  return json{{"kind", schedule.kind},
              {"steps", schedule.steps()},
              {"eps0", schedule.eps0},
              {"epsS", schedule.epsS},
              {"alpha_bar", vector_json(schedule.alpha_bar)}};
}

json to_json(const VeSchedule& ve) {
  return json{{"steps", ve.steps()}, {"sigma", vector_json(ve.sigma)}};
}

SpectralModel spectral_model_from_json(const json& j) {
  constexpr const char* what = "SpectralModel";
  check_fields(j, {"dim", "eigenvalues", "mean_spectral", "source"}, what);
  SpectralModel m;
  const auto dim = integer_field(j, "dim", what);
  m.eigenvalues = vector_field(j, "eigenvalues", what);
  m.mean_spectral = vector_field(j, "mean_spectral", what);
  m.source = string_field(j, "source", what);
  if (dim != m.eigenvalues.size() || dim != m.mean_spectral.size()) {
    throw ValidationError("SpectralModel: 'dim' does not match the vector lengths");
  }
  m.validate();
  return m;
}

Schedule schedule_from_json(const json& j) {
  constexpr const char* what = "Schedule";
  check_fields(j, {"kind", "steps", "eps0", "epsS", "alpha_bar"}, what);
  Schedule s;
  s.kind = string_field(j, "kind", what);
  const auto steps = integer_field(j, "steps", what);
  s.eps0 = number_field(j, "eps0", what);
  s.epsS = number_field(j, "epsS", what);
  s.alpha_bar = vector_field(j, "alpha_bar", what);
  if (steps + 1 != s.alpha_bar.size()) {
    throw ValidationError("Schedule: alpha_bar must have steps + 1 entries");
  }
  s.validate_box();
  return s;
}

VeSchedule ve_schedule_from_json(const json& j) {
  constexpr const char* what = "VeSchedule";
  check_fields(j, {"steps", "sigma"}, what);
  VeSchedule ve;
  const auto steps = integer_field(j, "steps", what);
  ve.sigma = vector_field(j, "sigma", what);
  if (steps + 1 != ve.sigma.size()) {
    throw ValidationError("VeSchedule: sigma must have steps + 1 entries");
  }
  ve.validate();
  return ve;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

SpectralModel read_spectral_model(const fs::path& path) {
  return spectral_model_from_json(read_json(path));
}

Schedule read_schedule(const fs::path& path) { return schedule_from_json(read_json(path)); }

namespace {

bool parse_number(const std::string& field, double& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  if (first < last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

MatrixXd read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    bool numeric = true;
    while (std::getline(ss, field, ',')) {
      double v = 0.0;
      if (!parse_number(field, v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first_line) {
        first_line = false;
        continue;
      }
      throw ValidationError("non-numeric CSV field in '" + path.string() + "'");
    }
    first_line = false;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ValidationError("ragged CSV rows in '" + path.string() + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("empty CSV file '" + path.string() + "'");
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  }
  return m;
}

std::string csv_matrix(const MatrixXd& m) {
  std::string out;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_csv_matrix(const fs::path& path, const MatrixXd& m) {
  write_text_atomic(path, csv_matrix(m));
}

void write_raw_f64(const fs::path& path, const MatrixXd& rows) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = rows;
  std::string bytes(static_cast<size_t>(rm.size()) * sizeof(double), '\0');
  if (rm.size() > 0) std::memcpy(bytes.data(), rm.data(), bytes.size());
  write_text_atomic(path, bytes);
  fs::path sidecar = path;
  sidecar += ".json";
  write_json(sidecar, json{{"dim", rows.cols()}, {"count", rows.rows()}});
}

MatrixXd read_raw_f64(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  const json meta = read_json(sidecar);
  check_fields(meta, {"dim", "count"}, "raw sidecar");
  const auto dim = integer_field(meta, "dim", "raw sidecar");
  const auto count = integer_field(meta, "count", "raw sidecar");
  if (dim < 1 || count < 0) throw ValidationError("raw sidecar: invalid dim/count");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(count, dim);
  const auto nbytes = static_cast<std::streamsize>(rm.size() * sizeof(double));
  in.read(reinterpret_cast<char*>(rm.data()), nbytes);
  if (in.gcount() != nbytes) {
    throw ValidationError("raw file '" + path.string() + "' is shorter than its sidecar says");
  }
  return rm;
}

namespace {

uint32_t le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}
uint16_t le16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

WavData read_wav_pcm16(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  auto bad = [&](const std::string& why) {
    return ValidationError("WAV '" + path.string() + "': " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw bad("not a RIFF/WAVE file");
  }
  WavData wav;
  int bits = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* h = bytes.data() + pos;
    const uint32_t size = le32(h + 4);
    const size_t body = pos + 8;
    if (body + size > bytes.size()) throw bad("truncated chunk");
    if (std::memcmp(h, "fmt ", 4) == 0) {
      if (size < 16) throw bad("short fmt chunk");
      const uint16_t format = le16(bytes.data() + body);
      wav.channels = le16(bytes.data() + body + 2);
      wav.sample_rate = static_cast<int>(le32(bytes.data() + body + 4));
      bits = le16(bytes.data() + body + 14);
      if (format != 1 || bits != 16) throw bad("only PCM 16-bit is supported");
      if (wav.channels < 1) throw bad("zero channels");
      have_fmt = true;
    } else if (std::memcmp(h, "data", 4) == 0) {
      if (!have_fmt) throw bad("data chunk before fmt chunk");
      const size_t frames = size / (2u * static_cast<unsigned>(wav.channels));
      wav.samples.resize(frames);
      for (size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (int c = 0; c < wav.channels; ++c) {
          const unsigned char* p = bytes.data() + body + 2 * (f * wav.channels + c);
          acc += static_cast<int16_t>(le16(p)) / 32768.0;
        }
        wav.samples[f] = acc / wav.channels;
      }
      return wav;
    }
    pos = body + size + (size & 1u);
  }
  throw bad("no data chunk");
}

void write_wav_pcm16(const fs::path& path, const std::vector<double>& samples, int sample_rate) {
  std::string out;
  auto put32 = [&](uint32_t v) {
    for (int k = 0; k < 4; ++k) out += static_cast<char>((v >> (8 * k)) & 0xff);
  };
  auto put16 = [&](uint16_t v) {
    out += static_cast<char>(v & 0xff);
    out += static_cast<char>(v >> 8);
  };
  const auto data_bytes = static_cast<uint32_t>(samples.size() * 2);
  out += "RIFF";
  put32(36 + data_bytes);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(static_cast<uint32_t>(sample_rate));
  put32(static_cast<uint32_t>(sample_rate) * 2);
  put16(2);
  put16(16);
  out += "data";
  put32(data_bytes);
  for (double x : samples) {
    const double clipped = std::max(-1.0, std::min(x, 32767.0 / 32768.0));
    put16(static_cast<uint16_t>(static_cast<int16_t>(std::lround(clipped * 32768.0))));
  }
  write_text_atomic(path, out);
}

}  // namespace specsched::io
