#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <list>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "coopsteer/errors.hpp"
#include "coopsteer/image.hpp"
#include "coopsteer/model.hpp"
#include "coopsteer/tensor.hpp"
#include "coopsteer/util.hpp"

namespace coopsteer {

// One camera frame with its telemetry row. Field list follows the Udacity
// CSV column set.
struct frame_record {
  std::int64_t index = 0;
  std::int64_t timestamp = 0;  // source units; nanoseconds in our exports
  std::size_t width = 0;
  std::size_t height = 0;
  std::string frame_id;
  std::string filename;  // relative to the dataset root
  double angle = 0.0;    // radians
  double torque = 0.0;
  double speed = 0.0;
  double latitude = 0.0;
  double longitude = 0.0;
  double altitude = 0.0;
};

// Ordered frame stream at ~20 Hz. Disk-backed sequences decode lazily into
// an LRU cache with a byte budget; memory-backed sequences (synthetic data)
// hold their rasters directly.
class frame_sequence {
 public:
  frame_sequence() = default;

  frame_sequence(std::vector<frame_record> records, std::string image_root,
                 std::size_t cache_bytes)
      : records_(std::move(records)), image_root_(std::move(image_root)),
        cache_budget_(cache_bytes) {}

  frame_sequence(std::vector<frame_record> records, std::vector<image_u8> frames)
      : records_(std::move(records)) {
    if (records_.size() != frames.size())
      throw config_error("frame_sequence: record/frame count mismatch");
    memory_frames_.reserve(frames.size());
    for (auto& f : frames)
      memory_frames_.push_back(std::make_shared<const image_u8>(std::move(f)));
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const frame_record& record(std::size_t i) const { return records_.at(i); }
  const std::vector<frame_record>& records() const { return records_; }
  const std::string& image_root() const { return image_root_; }

  // Decoded RGB raster for sequence position i (not the CSV index column).
  std::shared_ptr<const image_u8> frame(std::size_t i) const {
    if (!memory_frames_.empty()) return memory_frames_.at(i);
    const frame_record& rec = records_.at(i);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (auto it = cache_.find(i); it != cache_.end()) {
        lru_.splice(lru_.begin(), lru_, it->second.pos);
        return it->second.img;
      }
    }
    auto img = std::make_shared<const image_u8>(load_image(image_root_ + "/" + rec.filename));
    if (img->width != rec.width || img->height != rec.height)
      throw ingestion_error("image size mismatch for " + rec.filename + ": file is " +
                            std::to_string(img->width) + "x" + std::to_string(img->height) +
                            ", record says " + std::to_string(rec.width) + "x" +
                            std::to_string(rec.height));
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(i); it != cache_.end()) return it->second.img;
    lru_.push_front(i);
    cache_.emplace(i, entry{img, lru_.begin()});
    cache_used_ += img->byte_size();
    while (cache_used_ > cache_budget_ && lru_.size() > 1) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      auto it = cache_.find(victim);
      cache_used_ -= it->second.img->byte_size();
      cache_.erase(it);
    }
    return img;
  }

  double duration_seconds() const {
    if (records_.size() < 2) return 0.0;
    return double(records_.back().timestamp - records_.front().timestamp) * 1e-9;
  }

  // Mean frame rate from the timestamp span (timestamps in nanoseconds).
  double measured_rate_hz() const {
    const double dur = duration_seconds();
    if (dur <= 0.0) throw usage_error("measured_rate_hz: no usable timestamp span");
    return double(records_.size() - 1) / dur;
  }

 private:
  struct entry {
    std::shared_ptr<const image_u8> img;
    std::list<std::size_t>::iterator pos;
  };

  std::vector<frame_record> records_;
  std::string image_root_;
  std::vector<std::shared_ptr<const image_u8>> memory_frames_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::size_t, entry> cache_;
  mutable std::list<std::size_t> lru_;
  mutable std::size_t cache_used_ = 0;
  std::size_t cache_budget_ = default_cache_bytes();

 public:
  static std::size_t default_cache_bytes() {
    if (const char* env = std::getenv("COOPSTEER_CACHE_BYTES")) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (end && *end == '\0' && v > 0) return std::size_t(v);
    }
    return std::size_t(1) << 30;  // 1 GiB
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, std::size_t row, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw format_error("row " + std::to_string(row) + ": cannot parse '" + s + "' as number for "
                       "column " + col);
  }
}

inline std::int64_t parse_int(const std::string& s, std::size_t row, const std::string& col) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw format_error("row " + std::to_string(row) + ": cannot parse '" + s +
                       "' as integer for column " + col);
  }
}

}  // namespace detail

// Parses a Udacity-format CSV, keeps center-camera rows, sorts by
// timestamp, and verifies every referenced image is readable. Fails fast:
// unreadable images are reported together, nothing is skipped silently.
inline frame_sequence load_udacity_csv(const std::string& csv_path, const std::string& image_root,
                                       std::size_t cache_bytes =
                                           frame_sequence::default_cache_bytes()) {
  std::ifstream in(csv_path);
  if (!in) throw ingestion_error("cannot open " + csv_path);
  std::string line;
  if (!std::getline(in, line)) throw format_error(csv_path + ": empty file, header required");

  const auto header = detail::split_csv_line(line);
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  const auto need = [&](const char* name, const char* alias = nullptr) {
    if (auto it = col.find(name); it != col.end()) return it->second;
    if (alias)
      if (auto it = col.find(alias); it != col.end()) return it->second;
    throw format_error(csv_path + ": missing required column '" + name + "'");
  };
  const std::size_t c_index = need("index");
  const std::size_t c_ts = need("timestamp");
  const std::size_t c_w = need("width");
  const std::size_t c_h = need("height");
  const std::size_t c_fid = need("frame_id");
  const std::size_t c_file = need("filename");
  const std::size_t c_angle = need("angle");
  const std::size_t c_torque = need("torque");
  const std::size_t c_speed = need("speed");
  const std::size_t c_lat = need("latitude", "lat");
  const std::size_t c_lon = need("longitude", "long");
  const std::size_t c_alt = need("altitude", "alt");

  std::vector<frame_record> records;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size())
      throw format_error(csv_path + ": row " + std::to_string(row_no) + " has " +
                         std::to_string(f.size()) + " fields, header has " +
                         std::to_string(header.size()));
    frame_record r;
    r.frame_id = f[c_fid];
    if (r.frame_id.find("center") == std::string::npos) continue;
    r.index = detail::parse_int(f[c_index], row_no, "index");
    r.timestamp = detail::parse_int(f[c_ts], row_no, "timestamp");
    r.width = std::size_t(detail::parse_int(f[c_w], row_no, "width"));
    r.height = std::size_t(detail::parse_int(f[c_h], row_no, "height"));
    r.filename = f[c_file];
    r.angle = detail::parse_double(f[c_angle], row_no, "angle");
    r.torque = detail::parse_double(f[c_torque], row_no, "torque");
    r.speed = detail::parse_double(f[c_speed], row_no, "speed");
    r.latitude = detail::parse_double(f[c_lat], row_no, "latitude");
    r.longitude = detail::parse_double(f[c_lon], row_no, "longitude");
    r.altitude = detail::parse_double(f[c_alt], row_no, "altitude");
    if (r.width == 0 || r.height == 0)
      throw format_error(csv_path + ": row " + std::to_string(row_no) + " has empty image size");
    if (!std::isfinite(r.angle))
      throw format_error(csv_path + ": row " + std::to_string(row_no) + " has non-finite angle");
    records.push_back(std::move(r));
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const frame_record& a, const frame_record& b) {
                     return a.timestamp < b.timestamp;
                   });

  std::vector<std::string> bad;
  for (const auto& r : records)
    if (!sniff_image(image_root + "/" + r.filename)) bad.push_back(r.filename);
  if (!bad.empty()) {
    std::string msg = csv_path + ": " + std::to_string(bad.size()) + " unreadable image(s):";
    for (std::size_t i = 0; i < bad.size() && i < 10; ++i) msg += " " + bad[i];
    if (bad.size() > 10) msg += " ... and " + std::to_string(bad.size() - 10) + " more";
    throw ingestion_error(msg);
  }

  frame_sequence seq(std::move(records), image_root, cache_bytes);
  std::clog << "loaded " << seq.size() << " center-camera records spanning "
            << format_sig6(seq.duration_seconds()) << " s from " << csv_path << "\n";
  return seq;
}

// Index recipe for one 2x-frame sample: x ego frames ending at the anchor
// plus x lead frames starting dt frames later. Indices are positions in
// the sorted sequence.
struct window_spec {
  std::size_t anchor = 0;
  std::size_t x = 1;
  std::size_t dt = 0;

  std::vector<std::size_t> ego_indices() const {
    std::vector<std::size_t> out(x);
    for (std::size_t i = 0; i < x; ++i) out[i] = anchor - x + 1 + i;
    return out;
  }
  std::vector<std::size_t> lead_indices() const {
    std::vector<std::size_t> out(x);
    for (std::size_t i = 0; i < x; ++i) out[i] = anchor + dt + i;
    return out;
  }
};

// All anchors t with t-x+1 >= 0 and t+dt+x-1 <= n-1. Yields
// n - dt - 2x + 2 windows when that is positive, otherwise none.
inline std::vector<window_spec> make_windows(std::size_t n_frames, std::size_t x,
                                             std::size_t dt) {
  if (x < 1) throw config_error("make_windows: x must be >= 1");
  std::vector<window_spec> out;
  if (n_frames < dt + 2 * x - 1) return out;
  const std::size_t first = x - 1;
  const std::size_t last = n_frames - 1 - dt - (x - 1);
  out.reserve(last - first + 1);
  for (std::size_t t = first; t <= last; ++t) out.push_back({t, x, dt});
  return out;
}

// Seeded shuffle of the window list, first `fraction` of it for training.
// Frame order inside each window is untouched.
inline std::pair<std::vector<window_spec>, std::vector<window_spec>> split_train_val(
    std::vector<window_spec> windows, double fraction, std::uint64_t seed) {
  if (windows.empty()) throw usage_error("split_train_val: no windows");
  if (!(fraction > 0.0 && fraction < 1.0))
    throw config_error("split_train_val: fraction must be in (0,1), got " +
                       std::to_string(fraction));
  std::mt19937_64 rng(derive_seed(seed, 0x5117));
  std::shuffle(windows.begin(), windows.end(), rng);
  const std::size_t n_train = std::size_t(double(windows.size()) * fraction);
  std::vector<window_spec> train(windows.begin(), windows.begin() + n_train);
  std::vector<window_spec> val(windows.begin() + n_train, windows.end());
  return {std::move(train), std::move(val)};
}

// Pixel mapping [0,255] -> [-0.5, 0.5].
template <typename T>
tensor<T> normalize_frame(const image_u8& img) {
  tensor<T> out(shape_t{img.height, img.width, 3});
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = T(img.pixels[i]) / T(255) - T(0.5);
  return out;
}

// Brightness shift plus mean-anchored contrast, clamped back to the
// normalized range. Training-split samples only; never applied at eval.
template <typename T>
void augment_inplace(tensor<T>& img, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d_bright(-0.2, 0.2);
  std::uniform_real_distribution<double> d_contrast(0.8, 1.2);
  const double delta = d_bright(rng);
  const double factor = d_contrast(rng);
  double mean = 0.0;
  for (const T v : img.values) mean += double(v);
  mean /= double(img.size());
  for (T& v : img.values) {
    double out = (double(v) - mean) * factor + mean + delta;
    v = T(std::clamp(out, -0.5, 0.5));
  }
}

struct sample_options {
  bool augment = false;
  double ego_glare_prob = 0.0;  // whiteout of ego-role frames (V2V story: the
                                // shared lead stream stays clean)
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

template <typename T>
struct sample {
  std::vector<tensor<T>> frames;
  T label = T(0);
  window_spec provenance;
};

// Whether a frame index is glare-corrupted in its ego role. Pure function
// of (seed, index) so every window and every architecture sees the same
// corruption pattern.
inline bool ego_glare_hit(std::uint64_t seed, std::size_t frame_index, double prob) {
  if (prob <= 0.0) return false;
  const std::uint64_t h = derive_seed(seed, 0xe90, frame_index);
  return double(h >> 11) * 0x1.0p-53 < prob;
}

// Builds the arch-specific frame list for one window. Coop samples hold
// ego (chronological) then lead (chronological); baselines draw from the
// same window so comparisons see identical data.
template <typename T>
sample<T> assemble_sample(const frame_sequence& seq, const window_spec& w,
                          const model_config& cfg, const sample_options& opt) {
  sample<T> s;
  s.provenance = w;
  s.label = T(seq.record(w.anchor).angle);

  const auto fetch = [&](std::size_t idx, bool ego_role) {
    tensor<T> frame;
    if (ego_role && ego_glare_hit(opt.seed, idx, opt.ego_glare_prob)) {
      frame = tensor<T>(shape_t{cfg.input_h, cfg.input_w, cfg.channels}, T(0.5));
    } else {
      const auto img = seq.frame(idx);
      if (img->height != cfg.input_h || img->width != cfg.input_w)
        throw config_error("frame " + std::to_string(idx) + " is " +
                           std::to_string(img->height) + "x" + std::to_string(img->width) +
                           ", model expects " + std::to_string(cfg.input_h) + "x" +
                           std::to_string(cfg.input_w));
      frame = normalize_frame<T>(*img);
    }
    return frame;
  };

  switch (cfg.arch) {
    case arch_kind::coop:
      for (std::size_t idx : w.ego_indices()) s.frames.push_back(fetch(idx, true));
      for (std::size_t idx : w.lead_indices()) s.frames.push_back(fetch(idx, false));
      break;
    case arch_kind::baselineA:
      s.frames.push_back(fetch(w.anchor, true));
      break;
    case arch_kind::baselineD:
    case arch_kind::baselineE:
      s.frames.push_back(fetch(w.anchor - cfg.pair_gap, true));
      s.frames.push_back(fetch(w.anchor, true));
      break;
  }

  if (opt.augment) {
    std::mt19937_64 rng(derive_seed(opt.seed, opt.epoch, w.anchor, 0xa06));
    for (auto& f : s.frames) augment_inplace(f, rng);
  }
  return s;
}

}  // namespace coopsteer
