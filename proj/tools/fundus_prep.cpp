// fundus-prep command-line front end.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "fundus/fundus.hpp"

namespace fs = std::filesystem;
using namespace fundus;

namespace {

struct MethodFlags {
  double clip_limit = 2.0;
  std::string tile_grid = "8x8";
  std::string mode = "composite";
  bool sharpen = false;
  double eps_coarse = DpfrParams{}.eps_coarse;
  double dehaze_fine = DpfrParams{}.dehaze_fine;
  double scatter = DpfrParams{}.scatter_strength;
  float roi_threshold = kDefaultRoiThreshold;
  std::string boundary = "wrap";
  std::string kernel = "average";
  int start_patch = 32;
  int min_patch = 2;

  void add_to(CLI::App* app) {
    app->add_option("--clip-limit", clip_limit, "CLAHE clip limit (>= 1)");
    app->add_option("--tile-grid", tile_grid, "CLAHE tile grid RxC");
    app->add_option("--mode", mode, "PCAr selection: single|composite")
        ->check(CLI::IsMember({"single", "composite"}));
    app->add_flag("--sharpen", sharpen, "unsharp-mask PCAr candidates");
    app->add_option("--eps-coarse", eps_coarse, "DPFRr coarse guided-filter epsilon");
    app->add_option("--dehaze-fine", dehaze_fine, "DPFRr fine dehaze strength in [0,1]");
    app->add_option("--scatter", scatter, "DPFRr backscatter suppression strength");
    app->add_option("--roi-threshold", roi_threshold, "near-black cutoff for the fundus region");
    app->add_option("--boundary", boundary, "erosion convolution boundary")->check(CLI::IsMember({"wrap", "clamp"}));
    app->add_option("--kernel", kernel, "erosion kernel")->check(CLI::IsMember({"average", "gaussian"}));
    app->add_option("--start-patch", start_patch, "largest erosion patch");
    app->add_option("--min-patch", min_patch, "smallest erosion patch");
  }

  ProcessingOptions build() const {
    ProcessingOptions o;
    o.clahe.clip_limit = clip_limit;
    int rows = 0, cols = 0;
    char sep = 0;
    if (std::sscanf(tile_grid.c_str(), "%d%c%d", &rows, &sep, &cols) != 3 || (sep != 'x' && sep != 'X')) {
      throw Error(ErrorCode::InvalidParameter, "--tile-grid expects RxC, got '" + tile_grid + "'");
    }
    o.clahe.tile_rows = rows;
    o.clahe.tile_cols = cols;
    o.clahe.validate();
    o.pcar.mode = mode == "single" ? PcarMode::single : PcarMode::composite;
    o.pcar.sharpen = sharpen;
    o.pcar.roi_threshold = roi_threshold;
    o.dpfr.eps_coarse = eps_coarse;
    o.dpfr.dehaze_fine = dehaze_fine;
    o.dpfr.scatter_strength = scatter;
    o.dpfr.roi_threshold = roi_threshold;
    o.dpfr.validate();
    o.erosion.boundary = boundary == "clamp" ? Boundary::clamp : Boundary::wrap;
    o.erosion.kernel = kernel == "gaussian" ? ErosionKernel::gaussian : ErosionKernel::average;
    o.erosion.start_patch = start_patch;
    o.erosion.min_patch = min_patch;
    o.erosion.validate();
    return o;
  }
};

int cmd_run(const std::string& manifest_path, const std::string& method, const std::string& out, int size,
            const std::string& augment_spec, std::uint64_t seed, bool force, unsigned jobs, const std::string& task,
            const std::string& report_path, const MethodFlags& flags) {
  DatasetManifest m = load_manifest(manifest_path);
  m.method = parse_method(method);
  if (!task.empty()) m.task = parse_task(task);
  if (is_experimental(m.method)) {
    std::cerr << "note: '" << to_string(m.method) << "' is experimental and needs vessel masks\n";
  }
  BatchOptions opt;
  opt.width = opt.height = size;
  opt.augment = parse_augment_ops(augment_spec);
  opt.seed = seed;
  opt.force = force;
  opt.jobs = jobs;
  opt.processing = flags.build();

  const BatchReport r = run_batch(m, out, opt);
  std::cout << "processed " << r.processed << ", skipped " << r.skipped << ", failed " << r.failures.size()
            << " of " << r.total << " (" << r.files_written << " files written)\n";
  for (const auto& f : r.failures) std::cerr << "FAILED " << f.image_path.string() << ": " << f.message << '\n';
  if (!report_path.empty()) {
    std::ofstream(report_path) << r.to_json().dump(2) << '\n';
  }
  return r.failures.empty() ? 0 : 1;
}

int cmd_apply(const std::string& in, const std::string& out, const std::string& method, const std::string& mask,
              const MethodFlags& flags) {
  const MethodId id = parse_method(method);
  const ImageBuffer img = load_image(in);
  std::optional<VesselMask> vm;
  if (!mask.empty()) vm = load_mask(mask, img.width(), img.height());
  save_image(apply_method(id, img, vm ? &*vm : nullptr, flags.build()), out);
  return 0;
}

int cmd_preview(const std::vector<std::string>& inputs, const std::string& method, const std::string& out,
                int cell, const MethodFlags& flags) {
  const MethodId id = parse_method(method);
  const ProcessingOptions opt = flags.build();
  std::vector<ImageBuffer> before, after;
  for (const auto& path : inputs) {
    ImageBuffer img = load_image(path);
    std::optional<VesselMask> vm;
    if (requires_mask(id)) {
      const fs::path p(path);
      vm = load_mask(p.parent_path() / (p.stem().string() + ".mask.png"), img.width(), img.height());
    }
    ImageBuffer res = apply_method(id, img, vm ? &*vm : nullptr, opt);
    if (cell > 0) {
      img = resize_lanczos(img, cell, cell * img.height() / img.width());
      res = resize_lanczos(res, cell, cell * res.height() / res.width());
    }
    before.push_back(std::move(img));
    after.push_back(std::move(res));
  }
  preview_grid(before, after, out);
  return 0;
}

// pred.csv: path,predicted[,true]; truth.csv: path,label.
int cmd_metrics(const std::string& pred_path, const std::string& truth_path, int classes, const std::string& task,
                const std::string& method, const std::string& csv_out) {
  const CsvTable pred = read_csv(pred_path);
  const auto pcol = pred.column({"path"});
  const auto ycol = pred.column({"predicted", "pred", "prediction"});
  if (!pcol || !ycol) throw Error(ErrorCode::ManifestInvalid, pred_path + " needs path,predicted columns");

  std::map<std::string, int> truth_by_path;
  std::optional<std::size_t> inline_truth = pred.column({"true", "truth", "label"});
  if (!truth_path.empty()) {
    const CsvTable truth = read_csv(truth_path);
    const auto tp = truth.column({"path"});
    const auto tl = truth.column({"label", "true", "truth"});
    if (!tp || !tl) throw Error(ErrorCode::ManifestInvalid, truth_path + " needs path,label columns");
    for (const auto& row : truth.rows) truth_by_path[row[*tp]] = parse_label(row[*tl], truth_path);
    inline_truth.reset();
  } else if (!inline_truth) {
    throw Error(ErrorCode::ManifestInvalid, "no --truth given and " + pred_path + " has no true column");
  }

  std::vector<int> p, t;
  for (const auto& row : pred.rows) {
    p.push_back(parse_label(row[*ycol], pred_path));
    if (inline_truth) {
      t.push_back(parse_label(row[*inline_truth], pred_path));
    } else {
      auto it = truth_by_path.find(row[*pcol]);
      if (it == truth_by_path.end()) throw Error(ErrorCode::LengthMismatch, "no truth label for " + row[*pcol]);
      t.push_back(it->second);
    }
  }

  std::vector<std::string> names;
  if (!task.empty()) {
    const Task tk = parse_task(task);
    classes = class_count(tk);
    names = class_names(tk);
  }
  if (classes <= 0) {
    for (int v : p) classes = std::max(classes, v + 1);
    for (int v : t) classes = std::max(classes, v + 1);
    classes = std::max(classes, 2);
  }
  const ConfusionMatrix cm = build_cm(p, t, classes);
  const TableRows table = report_table({metrics(cm)}, {method}, names);
  std::cout << table.text;
  if (!csv_out.empty()) {
    std::ofstream(csv_out) << table.csv;
  } else {
    std::cout << '\n' << table.csv;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal fundus pre-processing toolkit"};
  app.require_subcommand(1);

  MethodFlags flags;

  auto* run = app.add_subcommand("run", "process a manifest into a train/val output tree");
  std::string manifest, method = "base", out, augment_spec, task, report;
  int size = 224;
  std::uint64_t seed = 0;
  bool force = false;
  unsigned jobs = 0;
  run->add_option("--manifest", manifest, "CSV with path,label,split[,mask]")->required()->check(CLI::ExistingFile);
  run->add_option("--method", method, "pre-processing method");
  run->add_option("--out", out, "output root")->required();
  run->add_option("--size", size, "square output size")->check(CLI::PositiveNumber);
  run->add_option("--augment", augment_spec, "train-split augmentation, e.g. hflip,rot15");
  run->add_option("--seed", seed, "augmentation seed");
  run->add_flag("--force", force, "overwrite existing outputs");
  run->add_option("--jobs,-j", jobs, "worker threads (0 = all cores)");
  run->add_option("--task", task, "plus|stages|zones, validates labels");
  run->add_option("--report", report, "write the batch report as JSON");
  flags.add_to(run);

  auto* apply = app.add_subcommand("apply", "process one image");
  std::string in_path, out_path, mask_path;
  apply->add_option("input", in_path)->required()->check(CLI::ExistingFile);
  apply->add_option("output", out_path)->required();
  apply->add_option("--method", method, "pre-processing method");
  apply->add_option("--mask", mask_path, "vessel mask for erode methods");
  flags.add_to(apply);

  auto* preview = app.add_subcommand("preview", "write a before/after grid");
  std::vector<std::string> inputs;
  int cell = 0;
  preview->add_option("inputs", inputs, "1 to 8 images")->required()->check(CLI::ExistingFile);
  preview->add_option("--method", method, "pre-processing method");
  preview->add_option("--out", out_path, "grid PNG")->required();
  preview->add_option("--cell", cell, "resize each cell to this width first");
  flags.add_to(preview);

  auto* met = app.add_subcommand("metrics", "confusion-matrix metrics from prediction CSVs");
  std::string pred, truth, csv_out, met_method = "model";
  int classes = 0;
  met->add_option("--pred", pred, "path,predicted[,true]")->required()->check(CLI::ExistingFile);
  met->add_option("--truth", truth, "path,label")->check(CLI::ExistingFile);
  met->add_option("--classes", classes, "class count (default: inferred)");
  met->add_option("--task", task, "plus|stages|zones");
  met->add_option("--method", met_method, "row label");
  met->add_option("--csv", csv_out, "write the CSV table here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(manifest, method, out, size, augment_spec, seed, force, jobs, task, report, flags);
    if (*apply) return cmd_apply(in_path, out_path, method, mask_path, flags);
    if (*preview) return cmd_preview(inputs, method, out_path, cell, flags);
    if (*met) return cmd_metrics(pred, truth, classes, task, met_method, csv_out);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
