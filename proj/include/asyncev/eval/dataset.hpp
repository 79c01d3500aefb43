#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include "asyncev/eval/scene.hpp"
#include "asyncev/event_model/io.hpp"

namespace asyncev::eval {

/// Runs body(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any call is rethrown after all threads join.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Scenes for seeds first_seed .. first_seed + count - 1, all other settings
/// taken from `base`.
inline std::vector<Sequence> generate_scenes(const SceneConfig& base, std::uint64_t first_seed, std::size_t count,
                                             int workers = 1) {
  std::vector<Sequence> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    SceneConfig c = base;
    c.seed = first_seed + i;
    out[i] = generate_scene(c);
  });
  return out;
}

struct Split {
  std::vector<Sequence> train;
  std::vector<Sequence> val;
  std::vector<Sequence> test;
};

/// Split sizes for n sequences: floor(0.70 n) train, floor(0.15 n) validation,
/// the remainder test.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const std::size_t train = n * 70 / 100;
  const std::size_t val = n * 15 / 100;
  return {train, val, n - train - val};
}

/// Orders by scene seed and cuts into contiguous seed ranges.
inline Split split_by_seed(std::vector<Sequence> all) {
  std::stable_sort(all.begin(), all.end(), [](const Sequence& a, const Sequence& b) { return a.seed < b.seed; });
  const auto [n_train, n_val, n_test] = split_sizes(all.size());
  Split s;
  auto it = std::make_move_iterator(all.begin());
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(it + static_cast<std::ptrdiff_t>(n_train), it + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(all.end()));
  return s;
}

inline std::string sequence_dir_name(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%06llu", static_cast<unsigned long long>(seed));
  return buf;
}

/// A dataset directory holds one sequence directory per scene.
inline void write_dataset(const std::filesystem::path& dir, const std::vector<Sequence>& seqs) {
  std::filesystem::create_directories(dir);
  for (const auto& s : seqs) io::write_sequence(dir / sequence_dir_name(s.seed), s);
}

/// Loads every sequence under `dir`, or `dir` itself if it is a sequence
/// directory. Sequences come back ordered by seed.
inline std::vector<Sequence> read_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("dataset directory not found: " + dir.string());
  if (std::filesystem::exists(dir / "sequence.cfg")) return {io::read_sequence(dir)};
  std::vector<std::filesystem::path> subdirs;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "sequence.cfg")) subdirs.push_back(entry.path());
  }
  if (subdirs.empty()) throw IoError("no sequences found under " + dir.string());
  std::sort(subdirs.begin(), subdirs.end());
  std::vector<Sequence> out;
  for (const auto& p : subdirs) out.push_back(io::read_sequence(p));
  std::stable_sort(out.begin(), out.end(), [](const Sequence& a, const Sequence& b) { return a.seed < b.seed; });
  return out;
}

}  // namespace asyncev::eval
