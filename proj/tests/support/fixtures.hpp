#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cornerforge/image_io.hpp"
#include "cornerforge/imaging.hpp"

namespace testing_support {

namespace fs = std::filesystem;
using namespace cornerforge;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cf") {
    std::random_device rd;
    path_ = fs::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline ImageBuffer random_image(std::mt19937_64& gen, std::uint32_t w, std::uint32_t h) {
  std::vector<Rgb> px(static_cast<std::size_t>(w) * h);
  for (auto& p : px) {
    const auto v = gen();
    p = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v >> 16)};
  }
  return ImageBuffer(w, h, std::move(px));
}

/// Mask with roughly `density` of pixels set; never empty.
inline BinaryMask random_mask(std::mt19937_64& gen, std::uint32_t w, std::uint32_t h, double density = 0.3) {
  BinaryMask m(w, h);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      if (u(gen) < density) m.set(x, y);
    }
  }
  if (m.empty()) m.set(static_cast<std::uint32_t>(gen() % w), static_cast<std::uint32_t>(gen() % h));
  return m;
}

/// Filled ellipse, the typical silhouette shape.
inline BinaryMask ellipse_mask(std::uint32_t w, std::uint32_t h) {
  BinaryMask m(w, h);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rx = std::max(w / 2.0, 0.5), ry = std::max(h / 2.0, 0.5);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1.0) m.set(x, y);
    }
  }
  return m;
}

struct FixtureSpec {
  std::size_t backgrounds = 12;
  std::uint32_t bg_w = 640;
  std::uint32_t bg_h = 480;
  std::size_t train_objects = 40;
  std::size_t heldout_objects = 16;
  std::size_t classes = 8;
  std::size_t train = 20;
  std::size_t val = 5;
  std::size_t test = 5;
  std::uint64_t seed = 42;
  bool attestation = true;
  std::string extra;  // appended verbatim to the config
};

/// Writes backgrounds, masks, pool CSVs and config.toml under root.
/// Masks are shared between objects to keep fixture creation cheap.
inline fs::path write_fixture(const fs::path& root, const FixtureSpec& spec) {
  std::mt19937_64 gen(spec.seed);
  fs::create_directories(root / "backgrounds");
  for (std::size_t i = 0; i < spec.backgrounds; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "bg_%03zu.png", i);
    ImageBuffer img(spec.bg_w, spec.bg_h);
    const Rgb sky{static_cast<std::uint8_t>(90 + gen() % 60), static_cast<std::uint8_t>(140 + gen() % 60), 230};
    for (std::uint32_t y = 0; y < spec.bg_h; ++y) {
      for (std::uint32_t x = 0; x < spec.bg_w; ++x) {
        const auto n = static_cast<std::uint8_t>((x * 7 + y * 13 + i) % 9);
        img.at(x, y) = y < spec.bg_h / 2 ? Rgb{static_cast<std::uint8_t>(sky.r + n), sky.g, sky.b}
                                         : Rgb{60, static_cast<std::uint8_t>(100 + n), 50};
      }
    }
    write_png(root / "backgrounds" / name, img);
  }
  fs::create_directories(root / "masks");
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes = {{40, 16}, {24, 24}, {12, 30}, {50, 20}};
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    write_mask(root / "masks" / ("shape_" + std::to_string(s) + ".png"),
               ellipse_mask(shapes[s].first, shapes[s].second));
  }
  auto write_pool = [&](const std::string& file, const std::string& prefix, std::size_t n) {
    std::string csv = "object_id,class_id,mask_path\n";
    for (std::size_t i = 0; i < n; ++i) {
      csv += prefix + std::to_string(i) + "," + std::to_string(i % spec.classes) + ",masks/shape_" +
             std::to_string(i % shapes.size()) + ".png\n";
    }
    write_text(root / file, csv);
  };
  write_pool("train_pool.csv", "tr", spec.train_objects);
  write_pool("heldout_pool.csv", "ho", spec.heldout_objects);

  std::string cfg;
  cfg += "schema_version = 1\n";
  cfg += "master_seed = " + std::to_string(spec.seed) + "\n";
  cfg += "background_dir = \"backgrounds\"\n";
  cfg += "output_dir = \"out\"\n";
  cfg += std::string("background_attestation = ") + (spec.attestation ? "true" : "false") + "\n";
  cfg += "\n[splits]\ntrain = " + std::to_string(spec.train) + "\nval = " + std::to_string(spec.val) +
         "\ntest = " + std::to_string(spec.test) + "\n";
  cfg += "\n[pools]\ntrain = \"train_pool.csv\"\nheldout = \"heldout_pool.csv\"\n";
  cfg += "\n[placement]\ncrop_size = 256\nvertical_fraction = 0.5\nmask_scale_min = 0.05\nmask_scale_max = 0.3\n";
  cfg += "\n[backend]\nkind = \"procedural\"\n";
  cfg += spec.extra;
  write_text(root / "config.toml", cfg);
  return root / "config.toml";
}

}  // namespace testing_support
