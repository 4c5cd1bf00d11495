// misr: command line driver for the super-resolution pipeline.
//
//   misr <command> --config run.cfg [--set key=value ...]
//
// Commands: simulate, assemble, split, baseline, train, infer, evaluate.
// Exit codes: 0 success, 1 failed invariant (e.g. divergence), 2 usage,
// configuration or I/O error. Progress goes to stderr.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "misr/config.hpp"
#include "misr/manifest.hpp"
#include "misr/metric.hpp"
#include "misr/nn/params_io.hpp"
#include "misr/nn/train.hpp"
#include "misr/report.hpp"
#include "misr/resample.hpp"
#include "misr/simgen.hpp"

namespace fs = std::filesystem;
using namespace misr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitUsage = 2;

void log(const std::string& msg) { std::cerr << "misr: " << msg << '\n'; }

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Manifest require_manifest(const RunConfig& cfg) {
  if (!fs::exists(cfg.manifest_path())) {
    throw IoError("missing file " + cfg.manifest_path().string() + " (run assemble first)");
  }
  return load_manifest(cfg.manifest_path());
}

// Evaluation members: the test split when one exists, otherwise every
// admitted member.
Dataset evaluation_set(const Manifest& man) {
  Dataset ds = load_split(man, man.split_done ? split_label::kTest : "");
  if (ds.members.empty()) throw ConfigError("no members to evaluate");
  return ds;
}

nn::NetworkParams<float> require_params(const RunConfig& cfg) {
  if (!fs::exists(cfg.params_path())) throw IoError("missing file " + cfg.params_path().string());
  return nn::load_params(cfg.params_path());
}

std::string member_file_name(const DataMember& m) { return std::string(to_string(m.band)) + "_" + m.tile_id; }

int cmd_simulate(const RunConfig& cfg) {
  const Dataset ds = gen_dataset(cfg.seed, cfg.members, cfg.n_lr, cfg.sim);
  ensure_dir(cfg.output_dir);
  for (const auto& m : ds.members) {
    ensure_dir(cfg.data_dir());
    write_member(cfg.data_dir(), m);
  }
  log("wrote " + std::to_string(ds.members.size()) + " members under " + cfg.data_dir().string());
  const Manifest man = assemble_root(cfg.data_dir(), cfg.thresholds());
  save_manifest(cfg.manifest_path(), man);
  log("manifest " + cfg.manifest_path().string());
  return kExitOk;
}

int cmd_assemble(const RunConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const Manifest man = assemble_root(cfg.data_dir(), cfg.thresholds());
  std::size_t admitted = 0;
  for (const auto& e : man.entries) {
    if (e.admitted) {
      ++admitted;
    } else {
      log("rejected " + e.id() + ": " + e.rule + " (" + e.detail + ")");
    }
  }
  save_manifest(cfg.manifest_path(), man);
  log("admitted " + std::to_string(admitted) + " of " + std::to_string(man.entries.size()) + " tiles");
  return kExitOk;
}

int cmd_split(const RunConfig& cfg) {
  Manifest man = require_manifest(cfg);
  assign_split(man, cfg.split, cfg.exclude);
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  for (const auto& e : man.entries) {
    n_train += e.split == split_label::kTrain ? 1 : 0;
    n_test += e.split == split_label::kTest ? 1 : 0;
  }
  save_manifest(cfg.manifest_path(), man);
  log("split: " + std::to_string(n_train) + " train, " + std::to_string(n_test) + " test");
  return kExitOk;
}

int cmd_baseline(const RunConfig& cfg) {
  const Dataset ds = evaluation_set(require_manifest(cfg));
  std::ostringstream csv;
  csv << "member,band,cpsnr_bicubic\n";
  double sum = 0.0;
  for (const auto& m : ds.members) {
    const double s = baseline_score(m);
    sum += s;
    csv << m.id() << ',' << to_string(m.band) << ',' << detail::exact(s) << '\n';
  }
  ensure_dir(cfg.output_dir);
  write_text(cfg.output_dir / "baseline.csv", csv.str());
  std::cout << "avg_cpsnr_bicubic," << detail::exact(sum / static_cast<double>(ds.members.size())) << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
  const Manifest man = require_manifest(cfg);
  const Dataset train = load_split(man, man.split_done ? split_label::kTrain : "");
  if (train.members.empty()) throw ConfigError("no training members");
  Dataset val;
  if (cfg.validate_during_training && man.split_done) val = load_split(man, split_label::kTest);
  log("training on " + std::to_string(train.members.size()) + " members for " + std::to_string(cfg.train.epochs) +
      " epochs");
  const auto result = nn::train(train, cfg.train, val.members.empty() ? nullptr : &val, [](const nn::EpochStats& s) {
    std::ostringstream msg;
    msg << "epoch " << s.epoch << " lr " << s.lr << " loss " << s.train_loss;
    if (std::isfinite(s.val_cpsnr)) msg << " val_cpsnr " << s.val_cpsnr;
    if (s.skipped > 0) msg << " (skipped " << s.skipped << " samples without clear pixels)";
    log(msg.str());
  });
  ensure_dir(cfg.output_dir);
  nn::save_params(cfg.params_path(), result.params);
  std::ostringstream hist;
  nn::write_history_csv(hist, result.history);
  write_text(cfg.output_dir / "history.csv", hist.str());
  log("parameters " + cfg.params_path().string());
  return kExitOk;
}

int cmd_infer(const RunConfig& cfg) {
  const auto params = require_params(cfg);
  const Dataset ds = evaluation_set(require_manifest(cfg));
  const fs::path dir = cfg.output_dir / "sr";
  ensure_dir(dir);
  for (const auto& m : ds.members) save_image(dir / (member_file_name(m) + ".png"), nn::super_resolve(params, m));
  log("wrote " + std::to_string(ds.members.size()) + " images to " + dir.string());
  return kExitOk;
}

// LR bicubic | SR | HR, side by side.
Image side_by_side(const DataMember& m, const Image& sr) {
  const Image up = bicubic_upscale_x3(m.lr_list[max_clearance_indices(m).front()].image);
  const int w = m.hr.width();
  const int h = m.hr.height();
  std::vector<double> px(static_cast<std::size_t>(3 * w) * static_cast<std::size_t>(h));
  const Image* panels[3] = {&up, &sr, &m.hr};
  for (int p = 0; p < 3; ++p) {
    for (int y = 0; y < h; ++y) {
      const auto row = panels[p]->row(y);
      std::copy(row.begin(), row.end(), px.begin() + static_cast<std::ptrdiff_t>(y) * 3 * w + p * w);
    }
  }
  return Image(3 * w, h, std::move(px));
}

int cmd_evaluate(const RunConfig& cfg) {
  const auto params = require_params(cfg);
  const Dataset ds = evaluation_set(require_manifest(cfg));
  ScoreReport report;
  std::vector<Image> outputs;
  for (const auto& m : ds.members) {
    Image sr = nn::super_resolve(params, m);
    report.rows.push_back(ScoreRow{m.id(), m.band, baseline_score(m), cpsnr(m.hr, m.hr_mask, sr).cpsnr});
    if (cfg.dump_images) outputs.push_back(std::move(sr));
  }
  ensure_dir(cfg.output_dir);
  std::ostringstream rows;
  write_rows_csv(rows, report);
  write_text(cfg.output_dir / "report_rows.csv", rows.str());
  std::ostringstream aggs;
  write_aggregates_csv(aggs, report);
  write_text(cfg.output_dir / "report.csv", aggs.str());
  write_text(cfg.output_dir / "report.json", to_json(report).dump(2) + "\n");
  std::cout << aggs.str();

  if (cfg.dump_images) {
    const auto gain = [&](std::size_t i) { return report.rows[i].network - report.rows[i].baseline; };
    std::size_t best = 0;
    std::size_t worst = 0;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      if (gain(i) > gain(best)) best = i;
      if (gain(i) < gain(worst)) worst = i;
    }
    const fs::path dir = cfg.output_dir / "dumps";
    ensure_dir(dir);
    save_image(dir / ("best_" + member_file_name(ds.members[best]) + ".png"), side_by_side(ds.members[best], outputs[best]));
    save_image(dir / ("worst_" + member_file_name(ds.members[worst]) + ".png"),
               side_by_side(ds.members[worst], outputs[worst]));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-image super-resolution pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("--set", overrides, "override one setting, key=value (repeatable)");

  struct Command {
    const char* name;
    const char* help;
    int (*run)(const RunConfig&);
  };
  const Command commands[] = {
      {"simulate", "generate a synthetic dataset in the ingestion layout", cmd_simulate},
      {"assemble", "apply admission rules to data_root and write the manifest", cmd_assemble},
      {"split", "assign admitted members to train/test by tile", cmd_split},
      {"baseline", "score bicubic upscaling of the clearest LR image", cmd_baseline},
      {"train", "train the network on the training split", cmd_train},
      {"infer", "super-resolve the evaluation members", cmd_infer},
      {"evaluate", "score network against bicubic and write the report", cmd_evaluate},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
    }
    cfg.validate();
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) return c.run(cfg);
    }
    return kExitUsage;
  } catch (const DivergenceError& e) {
    log(e.what());
    return kExitInvariant;
  } catch (const ConfigError& e) {
    log(std::string("config error: ") + e.what());
    return kExitUsage;
  } catch (const IoError& e) {
    log(std::string("I/O error: ") + e.what());
    return kExitUsage;
  } catch (const DecodeError& e) {
    log(std::string("decode error: ") + e.what());
    return kExitUsage;
  } catch (const FormatError& e) {
    log(std::string("format error: ") + e.what());
    return kExitUsage;
  } catch (const ShapeError& e) {
    log(std::string("shape error: ") + e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    log(std::string("I/O error: ") + e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log(e.what());
    return kExitInvariant;
  }
}
