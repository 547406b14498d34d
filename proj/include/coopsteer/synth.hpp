#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "coopsteer/data.hpp"
#include "coopsteer/image.hpp"
#include "coopsteer/util.hpp"

namespace coopsteer {

// Ground-truth steering signal for synthetic sequences, in radians:
//   s(t) = 0.5 sin(2 pi t / 97) + 0.3 sin(2 pi t / 41 + 1)
// Two incommensurate periods keep the signal from repeating within the
// dataset sizes used here. |s| <= 0.8.
inline double steering_signal(double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return 0.5 * std::sin(two_pi * t / 97.0) + 0.3 * std::sin(two_pi * t / 41.0 + 1.0);
}

struct synth_config {
  std::size_t n_frames = 1000;
  std::uint64_t seed = 42;
  std::size_t height = 64;
  std::size_t width = 64;
  double glare_prob = 0.0;  // whole-frame whiteout probability at generation
};

// Renders one road frame for anchor time t. Rows are perspective-ordered:
// the bottom row is "now" and row r (counted from the bottom) encodes the
// signal r/4 frames ahead, so a frame looks ~H/4 frames into the future.
// Each row carries a single bright 3-pixel line at
//   column = W/2 + round(s(t + r/4) * W/4).
inline image_u8 render_road_frame(double t, std::size_t h, std::size_t w) {
  image_u8 img;
  img.width = w;
  img.height = h;
  img.pixels.assign(h * w * 3, 0);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t y = h - 1 - r;
    const double s = steering_signal(t + double(r) / 4.0);
    long col = long(w) / 2 + std::lround(s * double(w) / 4.0);
    col = std::clamp(col, 1L, long(w) - 2L);
    for (long dx = -1; dx <= 1; ++dx)
      for (std::size_t c = 0; c < 3; ++c) img.at(y, std::size_t(col + dx), c) = 255;
  }
  return img;
}

struct synth_dataset {
  std::vector<frame_record> records;
  std::vector<image_u8> frames;

  frame_sequence to_sequence() && {
    return frame_sequence(std::move(records), std::move(frames));
  }
};

// Deterministic synthetic sequence: label(t) = s(t), 20 Hz timestamps,
// optional glare frames (all-max pixels) standing in for sun-burnt cameras.
inline synth_dataset synth_generate(const synth_config& cfg) {
  if (cfg.n_frames < 1) throw config_error("synth_generate: n_frames must be >= 1");
  if (cfg.height < 4 || cfg.width < 8)
    throw config_error("synth_generate: frame size too small to render");
  synth_dataset out;
  out.records.reserve(cfg.n_frames);
  out.frames.reserve(cfg.n_frames);
  std::mt19937_64 rng(derive_seed(cfg.seed, 0x5e9));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr std::int64_t t0 = 1500000000000000000LL;  // epoch-ish ns origin
  constexpr std::int64_t tick = 50000000LL;           // 50 ms -> 20 Hz
  for (std::size_t i = 0; i < cfg.n_frames; ++i) {
    const bool glare = cfg.glare_prob > 0.0 && unit(rng) < cfg.glare_prob;
    image_u8 img;
    if (glare) {
      img.width = cfg.width;
      img.height = cfg.height;
      img.pixels.assign(cfg.width * cfg.height * 3, 255);
    } else {
      img = render_road_frame(double(i), cfg.height, cfg.width);
    }
    frame_record r;
    r.index = std::int64_t(i);
    r.timestamp = t0 + std::int64_t(i) * tick;
    r.width = cfg.width;
    r.height = cfg.height;
    r.frame_id = "center_camera";
    char name[32];
    std::snprintf(name, sizeof(name), "frames/%06zu.png", i);
    r.filename = name;
    r.angle = steering_signal(double(i));
    r.speed = 10.0;
    out.records.push_back(std::move(r));
    out.frames.push_back(std::move(img));
  }
  return out;
}

inline const char* synth_csv_name = "data.csv";

// Writes data.csv plus frames/*.png so the on-disk layout matches what the
// ingestion path expects from any Udacity-format dataset.
inline void export_synth_dataset(const synth_dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "frames", ec);
  if (ec) throw io_error("cannot create " + dir + ": " + ec.message());

  const std::string csv_path = (fs::path(dir) / synth_csv_name).string();
  std::ofstream csv(csv_path);
  if (!csv) throw io_error("cannot write " + csv_path);
  csv << "index,timestamp,width,height,frame_id,filename,angle,torque,speed,latitude,"
         "longitude,altitude\n";
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    csv << r.index << ',' << r.timestamp << ',' << r.width << ',' << r.height << ','
        << r.frame_id << ',' << r.filename << ',' << format_exact(r.angle) << ','
        << format_exact(r.torque) << ',' << format_exact(r.speed) << ','
        << format_exact(r.latitude) << ',' << format_exact(r.longitude) << ','
        << format_exact(r.altitude) << '\n';
    save_png(ds.frames[i], (fs::path(dir) / r.filename).string());
  }
  if (!csv) throw io_error("write failed: " + csv_path);
}

}  // namespace coopsteer
