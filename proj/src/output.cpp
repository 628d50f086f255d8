#include "crowd/output.hpp"

#include "crowd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crowd {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path &path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error(path.string() + ": cannot open for writing");
  return os;
}

std::ifstream open_in(const fs::path &path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument(path.string() + ": cannot open");
  return is;
}

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string &line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string &s, const fs::path &path, long line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != s.size())
    throw InvalidArgument(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

} // namespace

void require_finite(std::span<const double> values, const std::string &what) {
  for (std::size_t k = 0; k < values.size(); ++k)
    if (!std::isfinite(values[k]))
      throw std::runtime_error(what + ": non-finite value at index " + std::to_string(k));
}

void write_grid_csv(const fs::path &path, int nx, int ny, std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(nx) * ny) throw InvalidArgument("write_grid_csv: size mismatch");
  require_finite(values, path.string());
  std::ofstream os = open_out(path);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i) os << ',';
      os << num(values[static_cast<std::size_t>(j) * nx + i]);
    }
    os << '\n';
  }
}

std::vector<double> read_grid_csv(const fs::path &path, int &nx, int &ny) {
  std::ifstream is = open_in(path);
  std::vector<double> out;
  std::string line;
  nx = -1;
  ny = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (nx < 0) nx = static_cast<int>(cells.size());
    if (static_cast<int>(cells.size()) != nx)
      throw InvalidArgument(path.string() + ":" + std::to_string(ny + 1) + ": ragged row");
    for (const auto &c : cells) out.push_back(parse_double(c, path, ny + 1));
    ++ny;
  }
  if (nx < 0) nx = 0;
  return out;
}

void write_pgm(const fs::path &path, int nx, int ny, std::span<const double> values, double scale) {
  if (values.size() != static_cast<std::size_t>(nx) * ny) throw InvalidArgument("write_pgm: size mismatch");
  std::ofstream os = open_out(path, std::ios::out | std::ios::binary);
  os << "P5\n" << nx << ' ' << ny << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(nx));
  for (int j = ny - 1; j >= 0; --j) {
    for (int i = 0; i < nx; ++i) {
      const double v = scale > 0.0 ? values[static_cast<std::size_t>(j) * nx + i] / scale : 0.0;
      row[i] = static_cast<unsigned char>(std::lround(std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0) * 255.0));
    }
    os.write(reinterpret_cast<const char *>(row.data()), nx);
  }
}

nlohmann::json grid_json(const Grid &grid) {
  return {{"nx", grid.nx()},
          {"ny", grid.ny()},
          {"dx", grid.dx()},
          {"dy", grid.dy()},
          {"origin", {grid.origin().x, grid.origin().y}}};
}

void write_json(const fs::path &path, const nlohmann::json &j) {
  std::ofstream os = open_out(path);
  os << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path &path) {
  std::ifstream is = open_in(path);
  try {
    return nlohmann::json::parse(is, nullptr, true, true);
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_evacuation_csv(const fs::path &path, std::span<const EvacuationSample> samples) {
  std::ofstream os = open_out(path);
  os << "step,time,remaining,exited,desired_speed\n";
  for (const EvacuationSample &s : samples) {
    const double v[] = {s.time, s.remaining, s.exited, s.desired_speed};
    require_finite(v, path.string());
    os << s.step << ',' << num(s.time) << ',' << num(s.remaining) << ',' << num(s.exited) << ','
       << num(s.desired_speed) << '\n';
  }
}

std::vector<EvacuationSample> read_evacuation_csv(const fs::path &path) {
  std::ifstream is = open_in(path);
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument(path.string() + ": empty file");
  const auto head = split(line, ',');
  auto column = [&](const std::string &name) {
    const auto it = std::find(head.begin(), head.end(), name);
    if (it == head.end()) throw InvalidArgument(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - head.begin());
  };
  const std::size_t cs = column("step"), ct = column("time"), cr = column("remaining"), ce = column("exited"),
                    cd = column("desired_speed");
  std::vector<EvacuationSample> out;
  long ln = 1;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    const auto c = split(line, ',');
    if (c.size() != head.size()) throw InvalidArgument(path.string() + ":" + std::to_string(ln) + ": wrong column count");
    out.push_back({static_cast<long>(parse_double(c[cs], path, ln)), parse_double(c[ct], path, ln),
                   parse_double(c[cr], path, ln), parse_double(c[ce], path, ln), parse_double(c[cd], path, ln)});
  }
  return out;
}

std::string frame_name(long step, const char *ext) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%06ld.%s", step, ext);
  return buf;
}

} // namespace crowd
