#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "asyncev/event_model/types.hpp"

namespace asyncev::io {

// Event stream text format: header "w h", then one "t x y p" line per event.

inline void write_events(std::ostream& os, const EventStream& events, int width, int height) {
  os << width << ' ' << height << '\n';
  for (const auto& e : events) os << e.t << ' ' << e.x << ' ' << e.y << ' ' << e.p << '\n';
}

struct EventFile {
  int width = 0;
  int height = 0;
  EventStream events;
};

inline EventFile read_events(std::istream& is) {
  EventFile f;
  if (!(is >> f.width >> f.height)) throw IoError("event file: missing 'w h' header");
  std::string line;
  std::getline(is, line);
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Event e;
    if (!(ls >> e.t >> e.x >> e.y >> e.p)) throw IoError("event file: malformed line " + std::to_string(lineno));
    f.events.push_back(e);
  }
  validate_stream(f.events, f.width, f.height);
  return f;
}

inline void write_events_file(const std::filesystem::path& path, const EventStream& events, int width, int height) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  write_events(os, events, width, height);
}

inline EventFile read_events_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  return read_events(is);
}

// Binary PGM (P5), 8-bit.

inline std::uint8_t to_byte(double v) {
  const double s = std::round(std::clamp(v, 0.0, 1.0) * 255.0);
  return static_cast<std::uint8_t>(s);
}

inline void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<char>(to_byte(img.pixels[i]));
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Raw bytes variant for heat-maps whose scaling is decided by the caller.
inline void write_pgm_bytes(const std::filesystem::path& path, int width, int height,
                            const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P5\n" << width << ' ' << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

namespace detail {
inline int read_pgm_int(std::istream& is) {
  int c = is.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      is.get();
    } else if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else {
      break;
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v)) throw IoError("pgm: malformed header");
  return v;
}
}  // namespace detail

struct PgmBytes {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bytes;
};

inline PgmBytes read_pgm_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::string magic(2, '\0');
  is.read(magic.data(), 2);
  if (magic != "P5") throw IoError("pgm: only binary P5 is supported: " + path.string());
  PgmBytes out;
  out.width = detail::read_pgm_int(is);
  out.height = detail::read_pgm_int(is);
  const int maxval = detail::read_pgm_int(is);
  if (out.width <= 0 || out.height <= 0 || maxval != 255) throw IoError("pgm: expected 8-bit image: " + path.string());
  is.get();  // single whitespace after maxval
  out.bytes.resize(static_cast<std::size_t>(out.width) * out.height);
  is.read(reinterpret_cast<char*>(out.bytes.data()), static_cast<std::streamsize>(out.bytes.size()));
  if (is.gcount() != static_cast<std::streamsize>(out.bytes.size())) throw IoError("pgm: truncated " + path.string());
  return out;
}

inline Image read_pgm(const std::filesystem::path& path) {
  const auto raw = read_pgm_bytes(path);
  Image img(raw.width, raw.height);
  for (std::size_t i = 0; i < raw.bytes.size(); ++i) img.pixels[i] = raw.bytes[i] / 255.0;
  return img;
}

// Angles CSV: "frame_index,angle_degrees".

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_angles(const std::filesystem::path& path, const std::vector<double>& angles) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "frame_index,angle_degrees\n";
  for (std::size_t i = 0; i < angles.size(); ++i) os << i << ',' << format_double(angles[i]) << '\n';
}

inline std::vector<double> read_angles(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  std::vector<double> out;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("frame_index", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("angles csv: malformed line " + std::to_string(lineno));
    const auto index = std::stoul(line.substr(0, comma));
    if (index != out.size()) throw IoError("angles csv: frame indices must be consecutive from 0");
    out.push_back(std::stod(line.substr(comma + 1)));
  }
  return out;
}

// Sequence directory: sequence.cfg, angles.csv, events.txt, frames/frame_NNNNN.pgm

inline std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%05zu.pgm", i);
  return buf;
}

inline void write_sequence(const std::filesystem::path& dir, const Sequence& seq) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "frames");
  {
    std::ofstream os(dir / "sequence.cfg");
    if (!os) throw IoError("cannot write " + (dir / "sequence.cfg").string());
    os << "width=" << seq.width << "\nheight=" << seq.height << "\nframe_interval=" << seq.frame_interval
       << "\nframes=" << seq.frames.size() << "\nseed=" << seq.seed << '\n';
  }
  write_angles(dir / "angles.csv", seq.angles);
  write_events_file(dir / "events.txt", seq.events, seq.width, seq.height);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) write_pgm(dir / "frames" / frame_name(i), seq.frames[i]);
}

inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

inline Sequence read_sequence(const std::filesystem::path& dir) {
  const auto kv = read_key_values(dir / "sequence.cfg");
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw IoError("sequence.cfg: missing key '" + k + "' in " + dir.string());
    return it->second;
  };
  Sequence seq;
  seq.width = std::stoi(get("width"));
  seq.height = std::stoi(get("height"));
  seq.frame_interval = std::stoll(get("frame_interval"));
  const auto n = std::stoul(get("frames"));
  if (kv.count("seed")) seq.seed = std::stoull(kv.at("seed"));
  seq.angles = read_angles(dir / "angles.csv");
  auto ev = read_events_file(dir / "events.txt");
  if (ev.width != seq.width || ev.height != seq.height) throw InvalidInput("events.txt resolution differs from sequence.cfg");
  seq.events = std::move(ev.events);
  for (std::size_t i = 0; i < n; ++i) seq.frames.push_back(read_pgm(dir / "frames" / frame_name(i)));
  validate_sequence(seq);
  return seq;
}

}  // namespace asyncev::io
