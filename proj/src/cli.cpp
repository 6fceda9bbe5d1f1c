#include "cornerforge/cli.hpp"

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "cornerforge/annotations.hpp"
#include "cornerforge/conditioning.hpp"
#include "cornerforge/config.hpp"
#include "cornerforge/conformance.hpp"
#include "cornerforge/dataset.hpp"
#include "cornerforge/eval.hpp"
#include "cornerforge/hash.hpp"
#include "cornerforge/image_io.hpp"
#include "cornerforge/log.hpp"
#include "cornerforge/stub_server.hpp"

namespace cornerforge::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnreachable:
    case ErrorCode::BackendRejected:
    case ErrorCode::ProtocolError:
    case ErrorCode::GenerationTimeout:
    case ErrorCode::IoError:
      return kRuntimeError;
    default:
      return kUsageError;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PlanArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool force = false;
};

int cmd_plan(const PlanArgs& args, std::ostream& out) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) cfg.master_seed = *args.seed;

  std::vector<std::string> rejected;
  const auto backgrounds = scan_backgrounds(cfg.background_dir, cfg.placement.crop_size, &rejected);
  for (const auto& r : rejected) log::warn("background rejected: {}", r);
  const auto train = ObjectPool::load_csv(cfg.train_pool, PoolId::Train, cfg.palette);
  const auto heldout = ObjectPool::load_csv(cfg.heldout_pool, PoolId::Heldout, cfg.palette);

  GenerationManifest manifest = plan_dataset(cfg.plan_config(), backgrounds, train, heldout, cfg.master_seed);
  manifest.background_attestation = cfg.background_attestation;
  const std::string text = serialize_manifest(manifest);

  fs::path target = args.out.empty() ? (cfg.output_dir.empty() ? fs::path("manifest.json")
                                                                 : cfg.output_dir / "manifest.json")
                                     : fs::path(args.out);
  if (fs::exists(target) && !args.force && read_file(target) != text) {
    throw Error(ErrorCode::ConfigInvalid,
                "manifest " + target.string() + " exists with different content (use --force to replace)");
  }
  write_file(target, text);

  const auto stats = dataset_stats(manifest);
  out << "manifest: " << target.string() << "\n";
  out << "items: " << manifest.items.size() << "\n";
  for (const auto& s : manifest.splits) {
    out << "  " << s.name << ": " << s.item_count << " items, " << s.background_ids.size() << " backgrounds\n";
  }
  out << "class histogram:\n";
  for (const auto& [name, count] : stats.per_class) out << "  " << name << ": " << count << "\n";
  if (!rejected.empty()) out << "rejected backgrounds: " << rejected.size() << "\n";
  out << "manifest sha256: " << sha256_hex(text) << "\n";
  return kSuccess;
}

struct GenerateArgs {
  std::string manifest;
  std::string out;
  std::size_t workers = 1;
  std::string backend_url;
  bool force = false;
};

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
  const auto manifest = load_manifest(args.manifest);
  if (!manifest.background_attestation) {
    throw Error(ErrorCode::ConfigInvalid,
                "background_attestation is false: confirm in the config that backgrounds contain no target "
                "objects and show sky in their top half, then re-plan");
  }
  BackendDescriptor backend = manifest.backend;
  if (!args.backend_url.empty()) {
    if (backend.kind == BackendKind::Procedural) backend.kind = BackendKind::RemoteMaskConditioned;
    backend.endpoint = args.backend_url;
  }
  const fs::path out_dir = args.out.empty() ? fs::path(args.manifest).parent_path() : fs::path(args.out);
  if (!args.force && (fs::exists(out_dir / "images") || fs::exists(out_dir / "annotations.json"))) {
    err << "error: " << out_dir.string() << " already contains a dataset; pass --force to regenerate\n";
    return kUsageError;
  }

  ExecuteOptions options;
  options.workers = args.workers;
  options.force = true;
  const auto result = execute_plan(manifest, backend, out_dir, options);

  const double secs = result.elapsed.count();
  const std::size_t done = result.images.size();
  char rate[64];
  std::snprintf(rate, sizeof rate, "%.2f", secs > 0 ? static_cast<double>(done) / secs : 0.0);
  out << "generated " << done << " of " << manifest.items.size() << " images in " << secs << " s (" << rate
      << " images/sec)\n";
  out << result.stats.to_table();
  if (!result.failures.empty()) {
    err << result.failures.size() << " item(s) failed; see " << (out_dir / "failures.json").string() << "\n";
    err << "first failure: " << result.failures.front().item_id << ": " << result.failures.front().message << "\n";
    return kRuntimeError;
  }
  return kSuccess;
}

struct EvaluateArgs {
  std::string gt;
  std::string pred;
  double threshold = kDefaultReportConfidence;
  std::string out;
  bool reference = false;
};

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const auto gt = read_ground_truth(args.gt);
  const auto preds = read_detections_jsonl(args.pred, true);
  const auto report = evaluate(preds, gt.boxes, gt.class_ids, args.threshold);
  const std::string text = report.to_text(args.reference, gt.class_names);
  const fs::path out_dir = args.out.empty() ? fs::path(args.pred).parent_path() : fs::path(args.out);
  json doc = report.to_json();
  if (args.reference) {
    json ref = json::array();
    for (const auto& r : kPublishedReference) {
      ref.push_back({{"dataset", r.dataset},
                     {"mAP", r.map},
                     {"mAP50", r.map50},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"reproducible", false}});
    }
    doc["published_reference"] = ref;
  }
  write_file(out_dir / "report.json", doc.dump(2) + "\n");
  write_file(out_dir / "report.txt", text);
  out << text;
  return kSuccess;
}

int cmd_gap(const std::string& real_path, const std::string& synth_path, const std::string& out_path,
            std::ostream& out) {
  auto load = [](const std::string& p) {
    try {
      return EvalReport::from_json(json::parse(read_file(p)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, p + ": " + e.what());
    }
  };
  const auto gap = domain_gap_report(load(real_path), load(synth_path));
  if (!out_path.empty()) write_file(out_path, gap.to_json().dump(2) + "\n");
  out << gap.to_text();
  return kSuccess;
}

int cmd_stats(const std::string& path, std::ostream& out) {
  const fs::path p(path);
  DatasetStats stats;
  if (fs::is_directory(p)) {
    const auto ann = p / "annotations.json";
    if (fs::exists(ann)) {
      const auto coco = import_coco(ann);
      std::vector<PaletteEntry> entries;
      const auto defaults = ClassPalette::airborne_default();
      for (std::size_t i = 0; i < coco.categories.size(); ++i) {
        const Rgb color = i < defaults.size() ? defaults.entries()[i].color
                                              : Rgb{1, static_cast<std::uint8_t>(i >> 8), static_cast<std::uint8_t>(i)};
        entries.push_back({coco.categories[i], static_cast<std::uint16_t>(i), color});
      }
      stats = dataset_stats(coco.annotations, coco.images, ClassPalette(std::move(entries)));
    } else if (fs::exists(p / "manifest.json")) {
      stats = dataset_stats(load_manifest(p / "manifest.json"));
    }
    // An empty directory yields all-zero stats.
  } else {
    stats = dataset_stats(load_manifest(p));
  }
  out << stats.to_table();
  return kSuccess;
}

struct ComposeArgs {
  std::string config;
  std::string object;
  std::string background;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_compose_debug(const ComposeArgs& args, std::ostream& out) {
  const RunConfig cfg = load_run_config(args.config);
  const auto train = ObjectPool::load_csv(cfg.train_pool, PoolId::Train, cfg.palette);
  const auto heldout = ObjectPool::load_csv(cfg.heldout_pool, PoolId::Heldout, cfg.palette);
  const PoolEntry* object = train.find(args.object);
  if (!object) object = heldout.find(args.object);
  if (!object) throw Error(ErrorCode::ConfigInvalid, "unknown object id '" + args.object + "'");

  const fs::path bg_path = cfg.background_dir / args.background;
  if (!fs::is_regular_file(bg_path)) throw Error(ErrorCode::ConfigInvalid, "unknown background id '" + args.background + "'");
  const ImageBuffer background = read_image(bg_path);
  const BinaryMask source = read_mask(object->mask_path);

  const Placement p = sample_placement(args.seed, {background.width(), background.height()},
                                       {object->object_id, object->class_id, source}, cfg.placement);
  const BinaryMask mask = scale_mask(source, p.mask_dims.w, p.mask_dims.h);
  const ImageBuffer crop = extract_crop(background, p.crop);
  const ConditionedPatch patch = compose_condition_patch(crop, mask, p.mask_rect, cfg.palette, object->class_id);

  const fs::path out_dir = args.out.empty() ? fs::path(".") : fs::path(args.out);
  fs::create_directories(out_dir);
  const std::string stem = "condition_" + object->object_id + "_" + std::to_string(args.seed);
  const fs::path png = out_dir / (stem + ".png");
  write_png(png, patch.pixels);
  const json sidecar = {{"class_id", patch.class_id},
                        {"mask_rect", {{"x", p.mask_rect.x}, {"y", p.mask_rect.y}, {"w", p.mask_rect.w}, {"h", p.mask_rect.h}}}};
  write_file(out_dir / (stem + ".json"), sidecar.dump(2) + "\n");

  // Self-check: re-read the written PNG and classify every pixel.
  const ImageBuffer written = read_image(png);
  const Rgb color = cfg.palette.at(object->class_id).color;
  std::size_t violations = 0;
  for (std::uint32_t y = 0; y < written.height(); ++y) {
    for (std::uint32_t x = 0; x < written.width(); ++x) {
      const Rgb& px = written.at(x, y);
      switch (zone_of(p.mask_rect, mask, x, y)) {
        case Zone::ClassColor: violations += px != color; break;
        case Zone::Black: violations += px != kBlack; break;
        case Zone::Source: violations += px != crop.at(x, y); break;
      }
    }
  }
  out << "wrote " << png.string() << " and " << (out_dir / (stem + ".json")).string() << "\n";
  out << "crop (" << p.crop.x << "," << p.crop.y << "," << p.crop.w << "," << p.crop.h << ") mask_rect ("
      << p.mask_rect.x << "," << p.mask_rect.y << "," << p.mask_rect.w << "," << p.mask_rect.h << ")\n";
  out << "self-check: " << (violations == 0 ? "OK" : "FAILED") << " (" << violations << " zone violations)\n";
  return violations == 0 ? kSuccess : kRuntimeError;
}

int cmd_conformance(const std::string& url, std::ostream& out) {
  const auto checks = run_conformance(url);
  std::size_t failed = 0;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) {
      out << ": " << c.detail;
      ++failed;
    }
    out << "\n";
  }
  out << checks.size() - failed << "/" << checks.size() << " checks passed\n";
  return failed == 0 ? kSuccess : kRuntimeError;
}

StubServer* g_stub = nullptr;

int cmd_serve_stub(const std::string& kind, std::ostream& out) {
  StubServer server(backend_kind_from_string(kind));
  g_stub = &server;
  std::signal(SIGINT, [](int) {
    if (g_stub) std::thread([] { g_stub->stop(); }).detach();
  });
  out << "stub server listening on " << server.url() << std::endl;
  server.wait();
  g_stub = nullptr;
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cornerforge: synthetic airborne-object dataset generation and evaluation"};
  app.require_subcommand(1);

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Plan a dataset run and write its manifest");
  plan_cmd->add_option("--config", plan.config, "Run configuration file")->required();
  plan_cmd->add_option("--seed", plan.seed, "Override master_seed");
  plan_cmd->add_option("--out", plan.out, "Manifest path (default: <output_dir>/manifest.json)");
  plan_cmd->add_flag("--force", plan.force, "Replace an existing manifest");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Execute a manifest");
  gen_cmd->add_option("manifest", gen.manifest, "Manifest file")->required();
  gen_cmd->add_option("--out", gen.out, "Dataset directory (default: the manifest's directory)");
  gen_cmd->add_option("--workers", gen.workers, "Worker threads")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--backend-url", gen.backend_url, "Use this remote backend instead of the manifest's");
  gen_cmd->add_flag("--force", gen.force, "Overwrite an existing dataset");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  ev_cmd->add_option("--gt", ev.gt, "Ground truth: annotations.json or JSONL")->required();
  ev_cmd->add_option("--pred", ev.pred, "Predictions JSONL")->required();
  ev_cmd->add_option("--threshold", ev.threshold, "Confidence threshold for precision/recall")
      ->check(CLI::Range(0.0, 1.0));
  ev_cmd->add_option("--out", ev.out, "Directory for report.json / report.txt");
  ev_cmd->add_flag("--reference", ev.reference, "Append the published real-vs-generated reference values");

  std::string gap_real, gap_synth, gap_out;
  auto* gap_cmd = app.add_subcommand("gap", "Compare a real-data report with a synthetic-data report");
  gap_cmd->add_option("--real", gap_real, "report.json on real data")->required();
  gap_cmd->add_option("--synth", gap_synth, "report.json on synthetic data")->required();
  gap_cmd->add_option("--out", gap_out, "Write the comparison as JSON");

  std::string stats_path;
  auto* stats_cmd = app.add_subcommand("stats", "Class and split counts of a manifest or dataset directory");
  stats_cmd->add_option("path", stats_path, "Manifest file or dataset directory")->required();

  ComposeArgs compose;
  auto* compose_cmd = app.add_subcommand("compose-debug", "Write one conditioned patch with a JSON sidecar");
  compose_cmd->add_option("--config", compose.config, "Run configuration file")->required();
  compose_cmd->add_option("--object", compose.object, "Object id from either pool")->required();
  compose_cmd->add_option("--background", compose.background, "Background id (path under background_dir)")->required();
  compose_cmd->add_option("--seed", compose.seed, "Placement seed")->required();
  compose_cmd->add_option("--out", compose.out, "Output directory");

  std::string conformance_url;
  auto* conf_cmd = app.add_subcommand("conformance", "Run the protocol conformance suite against a server");
  conf_cmd->add_option("--backend-url", conformance_url, "Server base URL")->required();

  std::string stub_kind = "mask_conditioned";
  auto* stub_cmd = app.add_subcommand("serve-stub", "Run an echo server implementing the generation protocol");
  stub_cmd->add_option("--kind", stub_kind, "mask_conditioned or diffusion");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << app.help();
    return kUsageError;
  }

  try {
    if (*plan_cmd) return cmd_plan(plan, out);
    if (*gen_cmd) return cmd_generate(gen, out, err);
    if (*ev_cmd) return cmd_evaluate(ev, out);
    if (*gap_cmd) return cmd_gap(gap_real, gap_synth, gap_out, out);
    if (*stats_cmd) return cmd_stats(stats_path, out);
    if (*compose_cmd) return cmd_compose_debug(compose, out);
    if (*conf_cmd) return cmd_conformance(conformance_url, out);
    if (*stub_cmd) return cmd_serve_stub(stub_kind, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace cornerforge::cli
