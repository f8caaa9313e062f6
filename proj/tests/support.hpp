#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "gazetrait/types.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("gazetrait_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Fully observed session with a random walk gaze and constant sampling.
inline gazetrait::SessionSeries random_session(const std::string& id, std::size_t n,
                                               unsigned seed, double missing = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  gazetrait::SessionSeries s;
  s.participant_id = {id};
  s.config = gazetrait::RecordingConfig{};
  double x = 512, y = 288;
  for (std::size_t t = 0; t < n; ++t) {
    gazetrait::GazeSample g;
    g.timestamp_s = static_cast<double>(t) * s.config.sampling_period_s;
    x = std::clamp(x + (u(rng) - 0.5) * 20, 0.0, 1024.0);
    y = std::clamp(y + (u(rng) - 0.5) * 20, 0.0, 576.0);
    if (u(rng) >= missing) {
      g.gaze_x_px = x;
      g.gaze_y_px = y;
    }
    if (u(rng) >= missing) g.pupil_mm = 3.0 + u(rng);
    s.samples.push_back(g);
  }
  return s;
}

}  // namespace testing
