#pragma once

#include "crowd/analysis.hpp"
#include "crowd/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace crowd {

/// Throws std::runtime_error naming `what` if any value is NaN or infinite.
void require_finite(std::span<const double> values, const std::string &what);

/// Cell values as CSV, one line per grid row, bottom row first.
void write_grid_csv(const std::filesystem::path &path, int nx, int ny, std::span<const double> values);
/// Reads back write_grid_csv output; nx and ny are taken from the file.
std::vector<double> read_grid_csv(const std::filesystem::path &path, int &nx, int &ny);

/// 8-bit binary PGM, top row first, value/scale mapped to 0..255 and clamped.
void write_pgm(const std::filesystem::path &path, int nx, int ny, std::span<const double> values, double scale);

/// Grid geometry record used to check that two runs can be compared.
nlohmann::json grid_json(const Grid &grid);

void write_json(const std::filesystem::path &path, const nlohmann::json &j);
nlohmann::json read_json(const std::filesystem::path &path);

/// step,time,remaining,exited,desired_speed[,...] files.
void write_evacuation_csv(const std::filesystem::path &path, std::span<const EvacuationSample> samples);
std::vector<EvacuationSample> read_evacuation_csv(const std::filesystem::path &path);

/// Frame file name for a step: 000120.csv and so on.
std::string frame_name(long step, const char *ext);

} // namespace crowd
