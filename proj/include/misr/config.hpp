#pragma once

// Run configuration: a flat `key = value` file. Blank lines and text after
// `#` are ignored. Every key must be known; anything else is a ConfigError.
//
//   output_dir         = run                 # all artifacts go here
//   data_root          = <output_dir>/data   # ingestion layout root
//   params_file        = <output_dir>/params.bin
//   seed               = 0                   # simulate
//   members            = 20
//   n_lr               = 9
//   sim.shift_max      = 2.0                 # plus sim.bias_max, sim.noise_min,
//                                            # sim.noise_max, sim.lr_cloud_prob, ...
//   lr_min_clearance   = 0.6
//   hr_min_clearance   = 0.75
//   min_lr_count       = 9
//   input_count        = 5
//   split.seed         = 0
//   split.test_fraction = 0.2
//   split.exclude      = RED/tile0003, tile0007
//   train.epochs       = 200                 # plus train.batch_size, train.lr_initial,
//                                            # train.lr_final, train.beta1, train.beta2,
//                                            # train.eps, train.seed, train.mask_loss,
//                                            # train.validate
//   evaluate.dump_images = true

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "misr/assembly.hpp"
#include "misr/error.hpp"
#include "misr/nn/network.hpp"
#include "misr/nn/train.hpp"
#include "misr/simgen.hpp"

namespace misr {

struct RunConfig {
  std::filesystem::path output_dir = "run";
  std::filesystem::path data_root;    // empty: <output_dir>/data
  std::filesystem::path params_file;  // empty: <output_dir>/params.bin

  std::uint64_t seed = 0;
  std::size_t members = 20;
  int n_lr = kMinLrCount;
  ParamsDistribution sim;

  double lr_min_clearance = 0.6;
  double hr_min_clearance = 0.75;
  int min_lr_count = kMinLrCount;
  int input_count = nn::kInputChannels;

  SplitConfig split;
  std::vector<std::string> exclude;

  nn::TrainConfig train;
  bool validate_during_training = false;

  bool dump_images = true;

  std::filesystem::path data_dir() const { return data_root.empty() ? output_dir / "data" : data_root; }
  std::filesystem::path params_path() const { return params_file.empty() ? output_dir / "params.bin" : params_file; }
  std::filesystem::path manifest_path() const { return output_dir / "manifest.json"; }

  Thresholds thresholds() const {
    return Thresholds{Ratio::from_decimal(lr_min_clearance), Ratio::from_decimal(hr_min_clearance), min_lr_count};
  }

  void validate() const {
    if (members == 0) throw ConfigError("members must be positive");
    if (n_lr < min_lr_count) throw ConfigError("n_lr must be at least min_lr_count");
    if (!(lr_min_clearance >= 0 && lr_min_clearance <= 1)) throw ConfigError("lr_min_clearance must lie in [0,1]");
    if (!(hr_min_clearance >= 0 && hr_min_clearance <= 1)) throw ConfigError("hr_min_clearance must lie in [0,1]");
    if (min_lr_count < input_count) throw ConfigError("min_lr_count must be at least input_count");
    if (input_count != nn::kInputChannels) {
      throw ConfigError("input_count is fixed at " + std::to_string(nn::kInputChannels) + " by the network");
    }
    if (!(split.test_fraction >= 0 && split.test_fraction <= 1)) throw ConfigError("split.test_fraction must lie in [0,1]");
    if (sim.shift_max < 0 || sim.shift_max > kBorder) throw ConfigError("sim.shift_max must lie in [0,3]");
    if (sim.noise_min < 0 || sim.noise_max < sim.noise_min) throw ConfigError("sim.noise_min/noise_max out of order");
    train.validate();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class Int>
Int parse_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto num = [](double RunConfig::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) { c.*field = parse_double(k, v); };
    };
    auto sim = [](double ParamsDistribution::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) { c.sim.*field = parse_double(k, v); };
    };
    auto trn = [](double nn::TrainConfig::*field) {
      return [field](RunConfig& c, const std::string& k, const std::string& v) { c.train.*field = parse_double(k, v); };
    };
    t["output_dir"] = [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = v; };
    t["data_root"] = [](RunConfig& c, const std::string&, const std::string& v) { c.data_root = v; };
    t["params_file"] = [](RunConfig& c, const std::string&, const std::string& v) { c.params_file = v; };
    t["seed"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); };
    t["members"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.members = parse_int<std::size_t>(k, v);
    };
    t["n_lr"] = [](RunConfig& c, const std::string& k, const std::string& v) { c.n_lr = parse_int<int>(k, v); };
    t["sim.shift_max"] = sim(&ParamsDistribution::shift_max);
    t["sim.bias_max"] = sim(&ParamsDistribution::bias_max);
    t["sim.noise_min"] = sim(&ParamsDistribution::noise_min);
    t["sim.noise_max"] = sim(&ParamsDistribution::noise_max);
    t["sim.lr_cloud_prob"] = sim(&ParamsDistribution::lr_cloud_prob);
    t["sim.lr_cloud_max"] = sim(&ParamsDistribution::lr_cloud_max);
    t["sim.hr_cloud_prob"] = sim(&ParamsDistribution::hr_cloud_prob);
    t["sim.hr_cloud_max"] = sim(&ParamsDistribution::hr_cloud_max);
    t["sim.drift_max"] = sim(&ParamsDistribution::drift_max);
    t["lr_min_clearance"] = num(&RunConfig::lr_min_clearance);
    t["hr_min_clearance"] = num(&RunConfig::hr_min_clearance);
    t["min_lr_count"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.min_lr_count = parse_int<int>(k, v);
    };
    t["input_count"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.input_count = parse_int<int>(k, v);
    };
    t["split.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.split.seed = parse_int<std::uint64_t>(k, v);
    };
    t["split.test_fraction"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.split.test_fraction = parse_double(k, v);
    };
    t["split.exclude"] = [](RunConfig& c, const std::string&, const std::string& v) { c.exclude = parse_list(v); };
    t["train.epochs"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.epochs = parse_int<int>(k, v);
    };
    t["train.batch_size"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.batch_size = parse_int<int>(k, v);
    };
    t["train.lr_initial"] = trn(&nn::TrainConfig::lr_initial);
    t["train.lr_final"] = trn(&nn::TrainConfig::lr_final);
    t["train.beta1"] = trn(&nn::TrainConfig::adam_beta1);
    t["train.beta2"] = trn(&nn::TrainConfig::adam_beta2);
    t["train.eps"] = trn(&nn::TrainConfig::adam_eps);
    t["train.seed"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.seed = parse_int<std::uint64_t>(k, v);
    };
    t["train.mask_loss"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.train.mask_loss = parse_bool(k, v);
    };
    t["train.validate"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.validate_during_training = parse_bool(k, v);
    };
    t["evaluate.dump_images"] = [](RunConfig& c, const std::string& k, const std::string& v) {
      c.dump_images = parse_bool(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace detail

/// Applies one `key = value` assignment.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

/// Parses `key = value` text on top of `base`.
inline RunConfig parse_config(std::string_view text, RunConfig base = {}) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    apply_setting(base, key, value);
  }
  return base;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace misr
