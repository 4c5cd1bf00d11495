#pragma once

// JSON manifest recording admission decisions and the split for a dataset on
// disk. Written with sorted keys and no timestamps so reruns are byte-equal.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "misr/assembly.hpp"
#include "misr/error.hpp"
#include "misr/png_io.hpp"

namespace misr {

using Json = nlohmann::json;

namespace split_label {
inline constexpr const char* kTrain = "train";
inline constexpr const char* kTest = "test";
inline constexpr const char* kExcluded = "excluded";
}  // namespace split_label

struct FileRecord {
  std::string image;
  std::string mask;
  Clearance clearance;
  int acquisition_index = -1;  // LR files only
  bool admitted = false;
};

struct ManifestEntry {
  Band band = Band::Red;
  std::string tile_id;
  bool admitted = false;
  std::string rule;  // rejection rule, empty when admitted
  std::string detail;
  std::vector<FileRecord> hr;
  std::vector<FileRecord> lr;
  int selected_hr = -1;
  std::string split;  // empty until split

  std::string id() const { return std::string(to_string(band)) + "/" + tile_id; }
};

struct Manifest {
  std::string data_root;
  Thresholds thresholds;
  std::vector<ManifestEntry> entries;
  std::uint64_t split_seed = 0;
  double test_fraction = 0.0;
  bool split_done = false;
};

/// Loads a tile's candidates, applies the admission rules and records the
/// outcome.
inline ManifestEntry assemble_tile(const TileFiles& files, const Thresholds& t) {
  ManifestEntry e;
  e.band = files.band;
  e.tile_id = files.tile_id;
  std::vector<HrCandidate> hrs;
  std::vector<LowRes> lrs;
  for (const auto& [img, mask] : files.hr) {
    HrCandidate c{load_image(files.dir / img), load_mask(files.dir / mask)};
    e.hr.push_back(FileRecord{img, mask, clearance_of(c.mask), -1, clearance_of(c.mask).at_least(t.hr_min)});
    hrs.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < files.lr.size(); ++i) {
    const auto& [img, mask] = files.lr[i];
    LowRes l{load_image(files.dir / img), load_mask(files.dir / mask), files.acquisition[i]};
    e.lr.push_back(FileRecord{img, mask, clearance_of(l.mask), l.acquisition_index, clearance_of(l.mask).at_least(t.lr_min)});
    lrs.push_back(std::move(l));
  }
  const std::vector<HrCandidate> hr_copy = hrs;
  Admission a = admit_member(std::move(hrs), std::move(lrs), files.band, files.tile_id, t);
  if (auto* r = std::get_if<Rejection>(&a)) {
    e.rule = r->rule;
    e.detail = r->detail;
    return e;
  }
  const DataMember& m = std::get<DataMember>(a);
  e.admitted = true;
  for (std::size_t i = 0; i < hr_copy.size(); ++i) {
    if (e.hr[i].admitted && hr_copy[i].image == m.hr && hr_copy[i].mask == m.hr_mask) {
      e.selected_hr = static_cast<int>(i);
      break;
    }
  }
  return e;
}

inline Manifest assemble_root(const std::filesystem::path& root, const Thresholds& t) {
  Manifest man;
  man.data_root = root.string();
  man.thresholds = t;
  for (const auto& tile : scan_root(root)) man.entries.push_back(assemble_tile(tile, t));
  return man;
}

/// Assigns train/test to admitted entries; entries whose member id or tile id
/// is listed in `exclude` are marked excluded and kept out of both sides.
inline void assign_split(Manifest& man, const SplitConfig& cfg, const std::vector<std::string>& exclude) {
  const std::set<std::string> excluded(exclude.begin(), exclude.end());
  std::vector<std::size_t> active;
  std::vector<std::string> tiles;
  for (std::size_t i = 0; i < man.entries.size(); ++i) {
    auto& e = man.entries[i];
    e.split.clear();
    if (!e.admitted) continue;
    if (excluded.contains(e.id()) || excluded.contains(e.tile_id)) {
      e.split = split_label::kExcluded;
      continue;
    }
    active.push_back(i);
    tiles.push_back(e.tile_id);
  }
  const auto is_test = split_assignment(tiles, cfg);
  for (std::size_t k = 0; k < active.size(); ++k) {
    man.entries[active[k]].split = is_test[k] ? split_label::kTest : split_label::kTrain;
  }
  man.split_seed = cfg.seed;
  man.test_fraction = cfg.test_fraction;
  man.split_done = true;
}

/// Reads an admitted member back from disk.
inline DataMember load_member(const Manifest& man, const ManifestEntry& e) {
  if (!e.admitted || e.selected_hr < 0) throw StructuralError("load_member: " + e.id() + " was not admitted");
  const std::filesystem::path dir = std::filesystem::path(man.data_root) / std::string(to_string(e.band)) / e.tile_id;
  DataMember m;
  m.band = e.band;
  m.tile_id = e.tile_id;
  const auto& hr = e.hr[static_cast<std::size_t>(e.selected_hr)];
  m.hr = load_image(dir / hr.image);
  m.hr_mask = load_mask(dir / hr.mask);
  for (const auto& l : e.lr) {
    if (l.admitted) m.lr_list.push_back(LowRes{load_image(dir / l.image), load_mask(dir / l.mask), l.acquisition_index});
  }
  return m;
}

/// Admitted members with the given split label (any admitted member when
/// `label` is empty).
inline Dataset load_split(const Manifest& man, const std::string& label) {
  Dataset ds;
  ds.provenance = man.data_root + (label.empty() ? "" : " [" + label + "]");
  for (const auto& e : man.entries) {
    if (!e.admitted) continue;
    if (!label.empty() && e.split != label) continue;
    ds.members.push_back(load_member(man, e));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// JSON.

namespace detail {

inline Json clearance_json(const Clearance& c) {
  return Json{{"clear", c.clear}, {"total", c.total}, {"value", c.value()}};
}

inline Clearance clearance_from_json(const Json& j) {
  return Clearance{j.at("clear").get<std::uint64_t>(), j.at("total").get<std::uint64_t>()};
}

inline Json file_json(const FileRecord& f, bool is_lr) {
  Json j{{"image", f.image}, {"mask", f.mask}, {"clearance", clearance_json(f.clearance)}, {"admitted", f.admitted}};
  if (is_lr) j["acquisition_index"] = f.acquisition_index;
  return j;
}

inline FileRecord file_from_json(const Json& j) {
  FileRecord f;
  f.image = j.at("image").get<std::string>();
  f.mask = j.at("mask").get<std::string>();
  f.clearance = clearance_from_json(j.at("clearance"));
  f.admitted = j.at("admitted").get<bool>();
  f.acquisition_index = j.value("acquisition_index", -1);
  return f;
}

inline Json ratio_json(const Ratio& r) { return Json{{"num", r.num}, {"den", r.den}}; }
inline Ratio ratio_from_json(const Json& j) { return Ratio{j.at("num").get<std::uint64_t>(), j.at("den").get<std::uint64_t>()}; }

}  // namespace detail

inline Json to_json(const Manifest& man) {
  Json entries = Json::array();
  for (const auto& e : man.entries) {
    Json j{{"id", e.id()}, {"band", to_string(e.band)}, {"tile_id", e.tile_id}, {"admitted", e.admitted}};
    if (!e.admitted) j["rejection"] = Json{{"rule", e.rule}, {"detail", e.detail}};
    Json hr = Json::array();
    for (const auto& f : e.hr) hr.push_back(detail::file_json(f, false));
    Json lr = Json::array();
    for (const auto& f : e.lr) lr.push_back(detail::file_json(f, true));
    j["hr"] = std::move(hr);
    j["lr"] = std::move(lr);
    if (e.selected_hr >= 0) j["selected_hr"] = e.hr[static_cast<std::size_t>(e.selected_hr)].image;
    if (!e.split.empty()) j["split"] = e.split;
    entries.push_back(std::move(j));
  }
  Json out{{"data_root", man.data_root},
           {"thresholds",
            {{"lr_min_clearance", detail::ratio_json(man.thresholds.lr_min)},
             {"hr_min_clearance", detail::ratio_json(man.thresholds.hr_min)},
             {"min_lr_count", man.thresholds.min_lr_count}}},
           {"members", std::move(entries)}};
  if (man.split_done) out["split"] = Json{{"seed", man.split_seed}, {"test_fraction", man.test_fraction}};
  return out;
}

inline Manifest manifest_from_json(const Json& j) {
  try {
    Manifest man;
    man.data_root = j.at("data_root").get<std::string>();
    const Json& t = j.at("thresholds");
    man.thresholds.lr_min = detail::ratio_from_json(t.at("lr_min_clearance"));
    man.thresholds.hr_min = detail::ratio_from_json(t.at("hr_min_clearance"));
    man.thresholds.min_lr_count = t.at("min_lr_count").get<int>();
    for (const Json& m : j.at("members")) {
      ManifestEntry e;
      const auto band = parse_band(m.at("band").get<std::string>());
      if (!band) throw FormatError("manifest: unknown band " + m.at("band").get<std::string>());
      e.band = *band;
      e.tile_id = m.at("tile_id").get<std::string>();
      e.admitted = m.at("admitted").get<bool>();
      if (m.contains("rejection")) {
        e.rule = m["rejection"].at("rule").get<std::string>();
        e.detail = m["rejection"].at("detail").get<std::string>();
      }
      for (const Json& f : m.at("hr")) e.hr.push_back(detail::file_from_json(f));
      for (const Json& f : m.at("lr")) e.lr.push_back(detail::file_from_json(f));
      if (m.contains("selected_hr")) {
        const auto name = m["selected_hr"].get<std::string>();
        const auto it = std::find_if(e.hr.begin(), e.hr.end(), [&](const FileRecord& f) { return f.image == name; });
        if (it == e.hr.end()) throw FormatError("manifest: selected HR " + name + " is not listed for " + e.id());
        e.selected_hr = static_cast<int>(it - e.hr.begin());
      }
      e.split = m.value("split", std::string{});
      man.entries.push_back(std::move(e));
    }
    if (j.contains("split")) {
      man.split_done = true;
      man.split_seed = j["split"].at("seed").get<std::uint64_t>();
      man.test_fraction = j["split"].at("test_fraction").get<double>();
    }
    return man;
  } catch (const Json::exception& ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& man) {
  const std::string text = to_json(man).dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  Json j;
  try {
    j = Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::exception& ex) {
    throw FormatError("manifest " + path.string() + ": " + ex.what());
  }
  return manifest_from_json(j);
}

}  // namespace misr
