#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "fundus/augment.hpp"
#include "fundus/color.hpp"
#include "fundus/dpfr.hpp"
#include "fundus/histops.hpp"
#include "fundus/image.hpp"
#include "fundus/io.hpp"
#include "fundus/pca_amp.hpp"
#include "fundus/resize.hpp"
#include "fundus/vessel_erosion.hpp"

namespace fundus {

namespace fs = std::filesystem;

enum class MethodId { base, gray, clahe, cgh, pcar, pcar_clahe, dpfrr, dpfrr_clahe, erode, erode_dpfrr_clahe };

inline constexpr std::array<MethodId, 10> kAllMethods{
    MethodId::base,  MethodId::gray,        MethodId::clahe, MethodId::cgh,
    MethodId::pcar,  MethodId::pcar_clahe,  MethodId::dpfrr, MethodId::dpfrr_clahe,
    MethodId::erode, MethodId::erode_dpfrr_clahe};

inline std::string_view to_string(MethodId m) noexcept {
  switch (m) {
    case MethodId::base: return "base";
    case MethodId::gray: return "gray";
    case MethodId::clahe: return "clahe";
    case MethodId::cgh: return "cgh";
    case MethodId::pcar: return "pcar";
    case MethodId::pcar_clahe: return "pcar_clahe";
    case MethodId::dpfrr: return "dpfrr";
    case MethodId::dpfrr_clahe: return "dpfrr_clahe";
    case MethodId::erode: return "erode";
    case MethodId::erode_dpfrr_clahe: return "erode_dpfrr_clahe";
  }
  return "?";
}

/// Accepts the canonical names and their dashed spellings ("dpfrr-clahe").
inline MethodId parse_method(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  for (MethodId m : kAllMethods) {
    if (to_string(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidParameter, "unknown method '" + name + "'");
}

/// Erosion variants need a vessel mask and are not part of the comparison set.
inline bool is_experimental(MethodId m) noexcept {
  return m == MethodId::erode || m == MethodId::erode_dpfrr_clahe;
}
inline bool requires_mask(MethodId m) noexcept { return is_experimental(m); }

enum class Task { plus, stages, zones };

inline int class_count(Task t) noexcept {
  switch (t) {
    case Task::plus: return 2;
    case Task::stages: return 4;
    case Task::zones: return 3;
  }
  return 0;
}

inline std::vector<std::string> class_names(Task t) {
  switch (t) {
    case Task::plus: return {"No Plus", "Plus"};
    case Task::stages: return {"Stage 0", "Stage 1", "Stage 2", "Stage 3"};
    case Task::zones: return {"Zone I", "Zone II", "Zone III"};
  }
  return {};
}

inline Task parse_task(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "plus") return Task::plus;
  if (s == "stages" || s == "stage") return Task::stages;
  if (s == "zones" || s == "zone") return Task::zones;
  throw Error(ErrorCode::InvalidParameter, "unknown task '" + s + "'");
}

struct ProcessingOptions {
  ClaheParams clahe{};
  PcarOptions pcar{};
  DpfrParams dpfr{};
  ErosionParams erosion{};
};

/// Runs one pre-processing method on an RGB image. Gray and CGH return a
/// single plane; everything else returns RGB.
inline ImageBuffer apply_method(MethodId method, const ImageBuffer& img, const VesselMask* mask = nullptr,
                                const ProcessingOptions& opt = {}) {
  require_channels(img, 3, "apply_method");
  if (requires_mask(method) && mask == nullptr) {
    throw Error(ErrorCode::InvalidParameter, std::string(to_string(method)) + " needs a vessel mask");
  }
  switch (method) {
    case MethodId::base: return img;
    case MethodId::gray: return to_grayscale(img);
    case MethodId::clahe: return clahe_rgb3(img, opt.clahe);
    case MethodId::cgh: return cgh(img, opt.clahe);
    case MethodId::pcar: return pcar_detailed(img, opt.pcar).image;
    case MethodId::pcar_clahe: return pcar_clahe(img, opt.pcar, opt.clahe);
    case MethodId::dpfrr: return dpfrr(img, opt.dpfr);
    case MethodId::dpfrr_clahe: return dpfrr_clahe(img, opt.dpfr, opt.clahe);
    case MethodId::erode: return clean_image(img, *mask, opt.erosion);
    case MethodId::erode_dpfrr_clahe: return dpfrr_clahe(clean_image(img, *mask, opt.erosion), opt.dpfr, opt.clahe);
  }
  throw Error(ErrorCode::InvalidParameter, "unhandled method");
}

enum class Split { train, val };

inline std::string_view to_string(Split s) noexcept { return s == Split::train ? "train" : "val"; }

struct ManifestEntry {
  fs::path image_path;
  int label = 0;
  Split split = Split::train;
  std::optional<fs::path> mask_path;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::optional<Task> task;
  MethodId method = MethodId::base;

  bool has_split(Split s) const {
    return std::any_of(entries.begin(), entries.end(), [s](const auto& e) { return e.split == s; });
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

/// Minimal RFC 4180 line splitter (double-quoted fields, "" escapes).
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

/// Header row plus data rows keyed by column name.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::initializer_list<std::string_view> names) const {
    for (auto n : names) {
      auto it = std::find(header.begin(), header.end(), n);
      if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    }
    return std::nullopt;
  }
};

inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileNotFound, path.string());
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (first) {
      for (auto& f : fields) {
        std::transform(f.begin(), f.end(), f.begin(), [](unsigned char c) { return std::tolower(c); });
      }
      t.header = std::move(fields);
      first = false;
    } else {
      fields.resize(t.header.size());
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw Error(ErrorCode::ManifestInvalid, path.string() + " is empty");
  return t;
}

inline int parse_label(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used != s.size() || v < 0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ManifestInvalid, where + ": label '" + s + "' is not a non-negative integer");
  }
}

/// Reads a `path,label,split,mask` manifest. Relative paths resolve against
/// the manifest's directory; `mask` may be empty.
inline DatasetManifest load_manifest(const fs::path& csv_path) {
  const CsvTable t = read_csv(csv_path);
  const auto path_col = t.column({"path"});
  const auto label_col = t.column({"label"});
  const auto split_col = t.column({"split"});
  const auto mask_col = t.column({"mask"});
  if (!path_col || !label_col || !split_col) {
    throw Error(ErrorCode::ManifestInvalid, csv_path.string() + " must have path,label,split columns");
  }
  const fs::path base = csv_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  DatasetManifest m;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = csv_path.filename().string() + " row " + std::to_string(i + 2);
    ManifestEntry e;
    if (row[*path_col].empty()) throw Error(ErrorCode::ManifestInvalid, where + ": empty path");
    e.image_path = resolve(row[*path_col]);
    e.label = parse_label(row[*label_col], where);
    const std::string& split = row[*split_col];
    if (split == "train") e.split = Split::train;
    else if (split == "val" || split == "validation") e.split = Split::val;
    else throw Error(ErrorCode::ManifestInvalid, where + ": split '" + split + "' is not train|val");
    if (mask_col && !row[*mask_col].empty()) e.mask_path = resolve(row[*mask_col]);
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline void validate_manifest(const DatasetManifest& m) {
  if (m.entries.empty()) throw Error(ErrorCode::ManifestInvalid, "manifest has no entries");
  if (m.task) {
    const int k = class_count(*m.task);
    for (const auto& e : m.entries) {
      if (e.label >= k) {
        throw Error(ErrorCode::ManifestInvalid, e.image_path.string() + ": label " + std::to_string(e.label) +
                                                    " invalid for a " + std::to_string(k) + "-class task");
      }
    }
  }
}

/// Mask used for an entry: the explicit manifest column, else `<stem>.mask.png`
/// next to the image.
inline fs::path mask_path_for(const ManifestEntry& e) {
  if (e.mask_path) return *e.mask_path;
  return e.image_path.parent_path() / (e.image_path.stem().string() + ".mask.png");
}

struct BatchOptions {
  int width = 224;
  int height = 224;
  std::vector<AugmentOp> augment;  // applied to the train split only
  std::uint64_t seed = 0;
  bool force = false;
  unsigned jobs = 0;  // 0 = hardware concurrency
  ProcessingOptions processing{};
};

struct BatchFailure {
  fs::path image_path;
  std::string message;
};

struct BatchReport {
  std::size_t total = 0;
  std::size_t processed = 0;
  std::size_t skipped = 0;  // output already present and --force not given
  std::size_t files_written = 0;
  std::vector<BatchFailure> failures;

  std::size_t succeeded() const noexcept { return processed + skipped; }
  bool ok() const noexcept { return failures.empty(); }
  nlohmann::json to_json() const {
    nlohmann::json j{{"total", total},
                     {"processed", processed},
                     {"skipped", skipped},
                     {"files_written", files_written},
                     {"failed", failures.size()}};
    j["failures"] = nlohmann::json::array();
    for (const auto& f : failures) j["failures"].push_back({{"path", f.image_path.string()}, {"error", f.message}});
    return j;
  }
};

inline constexpr const char* kMethodFile = "method.json";

/// Recorded method of an existing output split, if any.
inline std::optional<std::string> recorded_method(const fs::path& split_root) {
  const fs::path f = split_root / kMethodFile;
  if (!fs::exists(f)) return std::nullopt;
  std::ifstream in(f);
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("method").get<std::string>();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, f.string() + ": " + e.what());
  }
}

/// Training and validation data must come from the same method. Any split
/// already present under `out_dir` must have recorded `method`.
inline void check_pairing(const fs::path& out_dir, MethodId method) {
  for (Split s : {Split::train, Split::val}) {
    const auto rec = recorded_method(out_dir / std::string(to_string(s)));
    if (rec && *rec != to_string(method)) {
      throw Error(ErrorCode::PairingViolation, std::string(to_string(s)) + " split in " + out_dir.string() +
                                                   " was produced with '" + *rec + "', requested '" +
                                                   std::string(to_string(method)) + "'");
    }
  }
}

inline std::string method_metadata(MethodId method, Split split, const BatchOptions& opt) {
  nlohmann::json j{{"method", std::string(to_string(method))},
                   {"split", std::string(to_string(split))},
                   {"width", opt.width},
                   {"height", opt.height},
                   {"experimental", is_experimental(method)}};
  return j.dump(2) + "\n";
}

namespace detail {

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

// Output file stems, disambiguated when two entries share split/label/stem.
inline std::vector<std::string> output_stems(const DatasetManifest& m) {
  std::map<std::string, int> seen;
  for (const auto& e : m.entries) {
    ++seen[std::string(to_string(e.split)) + "/" + std::to_string(e.label) + "/" + e.image_path.stem().string()];
  }
  std::vector<std::string> stems;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const std::string key =
        std::string(to_string(e.split)) + "/" + std::to_string(e.label) + "/" + e.image_path.stem().string();
    stems.push_back(seen[key] > 1 ? e.image_path.stem().string() + "_" + std::to_string(i)
                                  : e.image_path.stem().string());
  }
  return stems;
}

}  // namespace detail

inline fs::path output_path(const fs::path& out_dir, const ManifestEntry& e, const std::string& stem,
                            const std::string& tag = "orig") {
  const std::string name = tag == "orig" ? stem + ".png" : stem + "__" + tag + ".png";
  return out_dir / std::string(to_string(e.split)) / std::to_string(e.label) / name;
}

/// Processes every manifest entry with `manifest.method`, resizes with
/// Lanczos-3 and writes `<out>/<split>/<label>/<stem>.png`. Per-file errors
/// are collected in the report; manifest and pairing errors throw before
/// anything is written.
inline BatchReport run_batch(const DatasetManifest& manifest, const fs::path& out_dir, const BatchOptions& opt = {}) {
  validate_manifest(manifest);
  if (opt.width < 1 || opt.height < 1) throw Error(ErrorCode::ZeroDimension, "target size must be positive");
  check_pairing(out_dir, manifest.method);

  for (Split s : {Split::train, Split::val}) {
    if (!manifest.has_split(s)) continue;
    detail::write_text_atomic(out_dir / std::string(to_string(s)) / kMethodFile,
                              method_metadata(manifest.method, s, opt));
  }

  const auto stems = detail::output_stems(manifest);
  const std::size_t n = manifest.entries.size();
  struct Outcome {
    enum class Kind { processed, skipped, failed } kind = Kind::failed;
    std::size_t written = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(n);

  auto process = [&](std::size_t i) {
    const ManifestEntry& e = manifest.entries[i];
    Outcome& out = outcomes[i];
    const fs::path target = output_path(out_dir, e, stems[i]);
    try {
      if (!opt.force && fs::exists(target)) {
        out.kind = Outcome::Kind::skipped;
        return;
      }
      const ImageBuffer img = load_image(e.image_path);
      std::optional<VesselMask> mask;
      if (requires_mask(manifest.method)) mask = load_mask(mask_path_for(e), img.width(), img.height());
      const ImageBuffer processed =
          apply_method(manifest.method, img, mask ? &*mask : nullptr, opt.processing);
      const ImageBuffer sized = resize_lanczos(processed, opt.width, opt.height);

      std::vector<AugmentedImage> variants;
      if (e.split == Split::train && !opt.augment.empty()) {
        // Seed depends only on the run seed and entry index, never on scheduling.
        variants = augment(sized, opt.augment, opt.seed * 0x9E3779B97F4A7C15ULL + i);
      } else {
        variants.push_back({"orig", sized});
      }
      // Augmented copies first so the primary output marks a finished entry.
      for (std::size_t v = variants.size(); v-- > 0;) {
        save_image(variants[v].image, output_path(out_dir, e, stems[i], variants[v].tag));
        ++out.written;
      }
      out.kind = Outcome::Kind::processed;
    } catch (const std::exception& ex) {
      out.kind = Outcome::Kind::failed;
      out.error = ex.what();
    }
  };

  const unsigned workers =
      std::max(1u, std::min<unsigned>(opt.jobs ? opt.jobs : std::thread::hardware_concurrency(),
                                      static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) process(i);
      });
    }
  }

  BatchReport report;
  report.total = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = outcomes[i];
    report.files_written += o.written;
    switch (o.kind) {
      case Outcome::Kind::processed: ++report.processed; break;
      case Outcome::Kind::skipped: ++report.skipped; break;
      case Outcome::Kind::failed: report.failures.push_back({manifest.entries[i].image_path, o.error}); break;
    }
  }
  return report;
}

/// Rebuilds (image, label, split) entries from an output tree, sorted by path.
/// Augmented copies (`__` in the name) are skipped.
inline DatasetManifest scan_output(const fs::path& out_dir) {
  DatasetManifest m;
  for (Split s : {Split::train, Split::val}) {
    const fs::path root = out_dir / std::string(to_string(s));
    if (!fs::exists(root)) continue;
    for (const auto& label_dir : fs::directory_iterator(root)) {
      if (!label_dir.is_directory()) continue;
      const int label = parse_label(label_dir.path().filename().string(), root.string());
      for (const auto& f : fs::directory_iterator(label_dir.path())) {
        const std::string name = f.path().filename().string();
        if (!f.is_regular_file() || f.path().extension() != ".png" || name.find("__") != std::string::npos ||
            name.front() == '.') {
          continue;
        }
        m.entries.push_back({f.path(), label, s, std::nullopt});
      }
    }
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const auto& a, const auto& b) { return a.image_path < b.image_path; });
  return m;
}

inline constexpr std::size_t kMaxPreviewPairs = 8;

/// Two-row grid: inputs on top, outputs below. Each cell is the size of the
/// largest image and smaller images are centered on black.
inline ImageBuffer preview_grid(const std::vector<ImageBuffer>& before, const std::vector<ImageBuffer>& after) {
  if (before.size() != after.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(before.size()) + " inputs vs " +
                                               std::to_string(after.size()) + " outputs");
  }
  if (before.empty()) throw Error(ErrorCode::EmptyInput, "preview needs at least one pair");
  if (before.size() > kMaxPreviewPairs) throw Error(ErrorCode::LengthMismatch, "preview holds at most 8 pairs");
  int cw = 0, ch = 0;
  for (const auto* list : {&before, &after}) {
    for (const auto& im : *list) {
      cw = std::max(cw, im.width());
      ch = std::max(ch, im.height());
    }
  }
  const int cols = static_cast<int>(before.size());
  ImageBuffer grid(cw * cols, ch * 2, 3);
  auto place = [&](const ImageBuffer& im, int col, int row) {
    const ImageBuffer rgb = im.channels() == 1 ? detail::gray_to_rgb(im) : im;
    const int ox = col * cw + (cw - rgb.width()) / 2;
    const int oy = row * ch + (ch - rgb.height()) / 2;
    grid = paste(grid, rgb, Roi{ox, oy, rgb.width(), rgb.height()});
  };
  for (int i = 0; i < cols; ++i) {
    place(before[static_cast<std::size_t>(i)], i, 0);
    place(after[static_cast<std::size_t>(i)], i, 1);
  }
  return grid;
}

inline void preview_grid(const std::vector<ImageBuffer>& before, const std::vector<ImageBuffer>& after,
                         const fs::path& path) {
  save_image(preview_grid(before, after), path);
}

}  // namespace fundus
