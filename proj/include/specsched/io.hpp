// File formats: SpectralModel / Schedule / VeSchedule JSON, CSV matrices,
// raw little-endian float64 with a JSON sidecar, and PCM16 WAV input.

#pragma once

#include "specsched/core.hpp"

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace specsched::io {

/// Shortest representation that parses back to the same double.
std::string format_double(double x);

nlohmann::json to_json(const SpectralModel& model);
nlohmann::json to_json(const Schedule& schedule);
nlohmann::json to_json(const VeSchedule& ve);

/// Strict parsers: every field required, unknown fields rejected.
SpectralModel spectral_model_from_json(const nlohmann::json& j);
Schedule schedule_from_json(const nlohmann::json& j);
VeSchedule ve_schedule_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it over the target.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

SpectralModel read_spectral_model(const std::filesystem::path& path);
Schedule read_schedule(const std::filesystem::path& path);

/// CSV of numbers, one row per line, comma separated. A header line whose
/// first field is not numeric is skipped.
MatrixXd read_csv_matrix(const std::filesystem::path& path);
std::string csv_matrix(const MatrixXd& m);
void write_csv_matrix(const std::filesystem::path& path, const MatrixXd& m);

/// Raw little-endian float64, row-major, with sidecar `<path>.json` holding
/// {"dim": d, "count": n}. Rows are records of length dim.
void write_raw_f64(const std::filesystem::path& path, const MatrixXd& rows);
MatrixXd read_raw_f64(const std::filesystem::path& path);

struct WavData {
  int channels = 0;
  int sample_rate = 0;
  /// Mono samples in [-1, 1): PCM16 scaled by 1/32768, channels averaged.
  std::vector<double> samples;
};

WavData read_wav_pcm16(const std::filesystem::path& path);
/// Mono PCM16 writer, used for fixtures.
void write_wav_pcm16(const std::filesystem::path& path, const std::vector<double>& samples,
                     int sample_rate);

}  // namespace specsched::io
