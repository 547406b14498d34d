#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coopsteer/errors.hpp"
#include "coopsteer/model.hpp"
#include "coopsteer/optimizer.hpp"
#include "coopsteer/version.hpp"

namespace coopsteer {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian");

inline nlohmann::ordered_json model_config_to_json(const model_config& cfg) {
  nlohmann::ordered_json j;
  j["arch"] = arch_name(cfg.arch);
  j["x"] = cfg.x;
  j["input_h"] = cfg.input_h;
  j["input_w"] = cfg.input_w;
  j["channels"] = cfg.channels;
  j["pair_gap"] = cfg.pair_gap;
  nlohmann::ordered_json conv = nlohmann::ordered_json::array();
  for (const auto& c : cfg.table.conv)
    conv.push_back({{"kernel", c.kernel},
                    {"filters", c.filters},
                    {"stride_h", c.stride_h},
                    {"stride_w", c.stride_w}});
  j["conv"] = conv;
  j["lstm_units"] = cfg.table.lstm_units;
  j["lstm_depth"] = cfg.table.lstm_depth;
  j["fc"] = cfg.table.fc;
  return j;
}

inline model_config model_config_from_json(const nlohmann::json& j) {
  model_config cfg;
  cfg.arch = arch_from_name(j.at("arch").get<std::string>());
  cfg.x = j.at("x").get<std::size_t>();
  cfg.input_h = j.at("input_h").get<std::size_t>();
  cfg.input_w = j.at("input_w").get<std::size_t>();
  cfg.channels = j.at("channels").get<std::size_t>();
  cfg.pair_gap = j.at("pair_gap").get<std::size_t>();
  cfg.table.conv.clear();
  for (const auto& c : j.at("conv"))
    cfg.table.conv.push_back({c.at("kernel").get<std::size_t>(),
                              c.at("filters").get<std::size_t>(),
                              c.at("stride_h").get<std::size_t>(),
                              c.at("stride_w").get<std::size_t>()});
  cfg.table.lstm_units = j.at("lstm_units").get<std::size_t>();
  cfg.table.lstm_depth = j.at("lstm_depth").get<std::size_t>();
  cfg.table.fc = j.at("fc").get<std::vector<std::size_t>>();
  return cfg;
}

namespace detail {

template <typename T>
constexpr const char* dtype_name() {
  if constexpr (sizeof(T) == 4) return "f32";
  else return "f64";
}

inline void append_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

}  // namespace detail

// Layout: magic line, u64 header length, JSON header (arch descriptor +
// tensor manifest + optimizer manifest), then the raw little-endian
// payload. Written atomically via a temp file.
template <typename T>
void save_checkpoint(const std::string& path, steering_model<T>& model,
                     adam<T>* optimizer = nullptr) {
  const auto params = model.params();

  nlohmann::ordered_json header;
  header["format"] = checkpoint_magic;
  header["dtype"] = detail::dtype_name<T>();
  header["model"] = model_config_to_json(model.cfg);

  std::vector<std::uint8_t> payload;
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& [name, t] : params) {
    manifest.push_back({{"name", name},
                        {"shape", t->shape},
                        {"offset", payload.size()},
                        {"count", t->size()}});
    detail::append_bytes(payload, t->values.data(), t->values.size() * sizeof(T));
  }
  header["tensors"] = manifest;

  if (optimizer && optimizer->step_count() > 0) {
    nlohmann::ordered_json opt;
    opt["t"] = optimizer->step_count();
    opt["lr"] = optimizer->config().lr;
    opt["beta1"] = optimizer->config().beta1;
    opt["beta2"] = optimizer->config().beta2;
    opt["eps"] = optimizer->config().eps;
    opt["moments_offset"] = payload.size();
    for (const auto& m : optimizer->first_moments())
      detail::append_bytes(payload, m.data(), m.size() * sizeof(double));
    for (const auto& v : optimizer->second_moments())
      detail::append_bytes(payload, v.data(), v.size() * sizeof(double));
    header["optimizer"] = opt;
  }

  const std::string body = header.dump();
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp);
    out << checkpoint_magic << '\n';
    const std::uint64_t len = body.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(body.data(), std::streamsize(body.size()));
    out.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
    if (!out) throw io_error("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw io_error("cannot move " + tmp + " to " + path + ": " + ec.message());
}

// Rebuilds the model (and optionally the optimizer state) exactly as saved.
template <typename T>
steering_model<T> load_checkpoint(const std::string& path, adam<T>* optimizer = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string magic;
  if (!std::getline(in, magic) || magic != checkpoint_magic)
    throw format_error(path + ": not a " + std::string(checkpoint_magic) + " checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string body(len, '\0');
  in.read(body.data(), std::streamsize(len));
  if (!in) throw format_error(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw format_error(path + ": bad header json: " + e.what());
  }
  if (header.at("dtype").get<std::string>() != detail::dtype_name<T>())
    throw format_error(path + ": checkpoint dtype " + header.at("dtype").get<std::string>() +
                       " does not match requested " + detail::dtype_name<T>());

  std::vector<std::uint8_t> payload(std::istreambuf_iterator<char>(in), {});

  auto model = steering_model<T>::build(model_config_from_json(header.at("model")), 0);
  auto params = model.params();
  const auto& manifest = header.at("tensors");
  if (manifest.size() != params.size())
    throw format_error(path + ": tensor manifest size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = manifest[i];
    auto& [name, t] = params[i];
    if (entry.at("name").get<std::string>() != name)
      throw format_error(path + ": tensor " + std::to_string(i) + " is '" +
                         entry.at("name").get<std::string>() + "', expected '" + name + "'");
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    const std::size_t count = entry.at("count").get<std::size_t>();
    if (count != t->size() || offset + count * sizeof(T) > payload.size())
      throw format_error(path + ": tensor '" + name + "' payload out of range");
    std::memcpy(t->values.data(), payload.data() + offset, count * sizeof(T));
  }

  if (optimizer && header.contains("optimizer")) {
    const auto& opt = header.at("optimizer");
    adam_config cfg;
    cfg.lr = opt.at("lr").get<double>();
    cfg.beta1 = opt.at("beta1").get<double>();
    cfg.beta2 = opt.at("beta2").get<double>();
    cfg.eps = opt.at("eps").get<double>();
    *optimizer = adam<T>(cfg);
    std::size_t offset = opt.at("moments_offset").get<std::size_t>();
    std::vector<std::vector<double>> m(params.size()), v(params.size());
    for (auto* dst : {&m, &v}) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        const std::size_t count = params[i].second->size();
        if (offset + count * sizeof(double) > payload.size())
          throw format_error(path + ": optimizer moments out of range");
        (*dst)[i].resize(count);
        std::memcpy((*dst)[i].data(), payload.data() + offset, count * sizeof(double));
        offset += count * sizeof(double);
      }
    }
    optimizer->restore(std::move(m), std::move(v), opt.at("t").get<std::uint64_t>());
  }
  return model;
}

}  // namespace coopsteer
