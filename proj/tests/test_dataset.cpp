#include <gtest/gtest.h>

#include <set>

#include "cornerforge/config.hpp"
#include "cornerforge/dataset.hpp"
#include "cornerforge/hash.hpp"
#include "cornerforge/rng.hpp"
#include "cornerforge/stub_server.hpp"
#include "support/fixtures.hpp"

using namespace cornerforge;
using testing_support::FixtureSpec;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct Planned {
  RunConfig cfg;
  std::vector<BackgroundEntry> backgrounds;
  ObjectPool train, heldout;
  GenerationManifest manifest;
};

Planned plan_fixture(const fs::path& root, const FixtureSpec& spec = {}) {
  Planned p;
  p.cfg = load_run_config(testing_support::write_fixture(root, spec));
  p.backgrounds = scan_backgrounds(p.cfg.background_dir, p.cfg.placement.crop_size);
  p.train = ObjectPool::load_csv(p.cfg.train_pool, PoolId::Train, p.cfg.palette);
  p.heldout = ObjectPool::load_csv(p.cfg.heldout_pool, PoolId::Heldout, p.cfg.palette);
  p.manifest = plan_dataset(p.cfg.plan_config(), p.backgrounds, p.train, p.heldout, p.cfg.master_seed);
  p.manifest.background_attestation = true;
  return p;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

}  // namespace

TEST(Backgrounds, ScanRejectsSmallImagesAndSorts) {
  TempDir dir;
  fs::create_directories(dir / "sub");
  write_png(dir / "b.png", ImageBuffer(300, 300));
  write_png(dir / "sub/a.png", ImageBuffer(256, 400));
  write_png(dir / "small.png", ImageBuffer(255, 900));
  testing_support::write_text(dir / "notes.txt", "ignored");
  std::vector<std::string> rejected;
  const auto bgs = scan_backgrounds(dir.path(), 256, &rejected);
  ASSERT_EQ(bgs.size(), 2u);
  EXPECT_EQ(bgs[0].id, "b.png");
  EXPECT_EQ(bgs[1].id, "sub/a.png");
  EXPECT_EQ(bgs[1].dims, (Size2{256, 400}));
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_NE(rejected[0].find("small.png"), std::string::npos);
}

TEST(ObjectPool, LoadsIdsAndNames) {
  TempDir dir;
  write_mask(dir / "m.png", BinaryMask(4, 4, true));
  testing_support::write_text(dir / "pool.csv", "object_id,class_id,mask_path\na,3,m.png\nb,Drone,m.png\n");
  const auto pool = ObjectPool::load_csv(dir / "pool.csv", PoolId::Train, ClassPalette::airborne_default());
  ASSERT_EQ(pool.entries.size(), 2u);
  EXPECT_EQ(pool.entries[0].class_id, 3);
  EXPECT_EQ(pool.entries[1].class_id, 4);
  EXPECT_EQ(pool.entries[1].mask_path, dir / "m.png");
  EXPECT_NE(pool.find("b"), nullptr);
  EXPECT_EQ(pool.find("c"), nullptr);
}

TEST(ObjectPool, RejectsBadRows) {
  TempDir dir;
  const auto palette = ClassPalette::airborne_default();
  testing_support::write_text(dir / "dup.csv", "object_id,class_id,mask_path\na,1,m.png\na,2,m.png\n");
  EXPECT_THROW(ObjectPool::load_csv(dir / "dup.csv", PoolId::Train, palette), Error);
  testing_support::write_text(dir / "cls.csv", "object_id,class_id,mask_path\na,Blimp,m.png\n");
  EXPECT_EQ(code_of([&] { ObjectPool::load_csv(dir / "cls.csv", PoolId::Train, palette); }), ErrorCode::UnknownClass);
  testing_support::write_text(dir / "id.csv", "object_id,class_id,mask_path\na,8,m.png\n");
  EXPECT_EQ(code_of([&] { ObjectPool::load_csv(dir / "id.csv", PoolId::Train, palette); }), ErrorCode::UnknownClass);
}

TEST(Plan, SplitCountsAndHygiene) {
  TempDir dir;
  const auto p = plan_fixture(dir.path());
  const auto& m = p.manifest;
  ASSERT_EQ(m.items.size(), 30u);
  std::map<std::string, std::size_t> per_split;
  for (const auto& it : m.items) ++per_split[it.split];
  EXPECT_EQ(per_split["train"], 20u);
  EXPECT_EQ(per_split["val"], 5u);
  EXPECT_EQ(per_split["test"], 5u);

  std::map<std::string, std::string> owner;
  for (const auto& s : m.splits) {
    EXPECT_FALSE(s.background_ids.empty());
    for (const auto& id : s.background_ids) EXPECT_TRUE(owner.emplace(id, s.name).second) << id;
  }
  std::set<std::string> heldout_ids;
  for (const auto& e : p.heldout.entries) heldout_ids.insert(e.object_id);
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    const auto& it = m.items[i];
    EXPECT_EQ(owner.at(it.background_id), it.split);
    const bool heldout = heldout_ids.count(it.placement.object_ref) > 0;
    EXPECT_EQ(heldout, it.split != "train") << it.item_id;
    EXPECT_EQ(it.placement.seed, hash64(p.cfg.master_seed, i));
    EXPECT_TRUE(placement_valid(it.placement, m.background(it.background_id).dims, 256));
    EXPECT_FALSE(it.prompt);
  }
  EXPECT_EQ(m.rng_algorithm, kRngAlgorithm);
}

TEST(Plan, DeterministicSerialization) {
  TempDir a, b;
  const auto pa = plan_fixture(a.path());
  const auto pb = plan_fixture(b.path());
  const auto again = plan_dataset(pa.cfg.plan_config(), pa.backgrounds, pa.train, pa.heldout, pa.cfg.master_seed);
  EXPECT_EQ(serialize_manifest(again),
            serialize_manifest(plan_dataset(pa.cfg.plan_config(), pa.backgrounds, pa.train, pa.heldout,
                                            pa.cfg.master_seed)));
  // Same fixture content in another directory: only the paths differ.
  EXPECT_EQ(pa.manifest.items, pb.manifest.items);
  const auto other = plan_dataset(pa.cfg.plan_config(), pa.backgrounds, pa.train, pa.heldout, pa.cfg.master_seed + 1);
  EXPECT_NE(serialize_manifest(other), serialize_manifest(again));
}

TEST(Plan, ManifestJsonRoundTrip) {
  TempDir dir;
  FixtureSpec spec;
  spec.extra = "\n[merge]\nmode = \"feather\"\nborder_px = 3\n";
  const auto p = plan_fixture(dir.path(), spec);
  const auto text = serialize_manifest(p.manifest);
  EXPECT_EQ(text.back(), '\n');
  const auto back = manifest_from_json(nlohmann::json::parse(text));
  EXPECT_EQ(serialize_manifest(back), text);
  EXPECT_EQ(back.items, p.manifest.items);
  ASSERT_TRUE(std::holds_alternative<Feather>(back.merge_mode));
  EXPECT_EQ(std::get<Feather>(back.merge_mode).border_px, 3u);

  auto doc = nlohmann::json::parse(text);
  doc["schema_version"] = 99;
  EXPECT_THROW(manifest_from_json(doc), Error);
}

TEST(Plan, EmptySplitsGiveEmptyManifest) {
  TempDir dir;
  FixtureSpec spec;
  spec.train = spec.val = spec.test = 0;
  const auto p = plan_fixture(dir.path(), spec);
  EXPECT_TRUE(p.manifest.items.empty());
  const auto stats = dataset_stats(p.manifest);
  EXPECT_EQ(stats.total, 0u);
  EXPECT_EQ(manifest_from_json(manifest_to_json(p.manifest)).items.size(), 0u);
}

TEST(Plan, Errors) {
  TempDir dir;
  auto p = plan_fixture(dir.path());
  const auto cfg = p.cfg.plan_config();
  const std::vector<BackgroundEntry> two(p.backgrounds.begin(), p.backgrounds.begin() + 2);
  EXPECT_EQ(code_of([&] { plan_dataset(cfg, two, p.train, p.heldout, 1); }), ErrorCode::InsufficientBackgrounds);
  EXPECT_EQ(code_of([&] { plan_dataset(cfg, p.backgrounds, p.train, ObjectPool{PoolId::Heldout, {}}, 1); }),
            ErrorCode::EmptyPool);
  auto overlapping = p.heldout;
  overlapping.entries.push_back(p.train.entries[0]);
  EXPECT_EQ(code_of([&] { plan_dataset(cfg, p.backgrounds, p.train, overlapping, 1); }), ErrorCode::ConfigInvalid);
  auto quota_cfg = cfg;
  quota_cfg.class_quota = std::map<std::uint16_t, std::size_t>{{0, 3}};
  EXPECT_EQ(code_of([&] { plan_dataset(quota_cfg, p.backgrounds, p.train, p.heldout, 1); }), ErrorCode::ConfigInvalid);
}

TEST(Plan, QuotaGivesExactClassCounts) {
  TempDir dir;
  FixtureSpec spec;
  spec.extra = "\n[quota]\n\"Large Airplane\" = 10\n\"Helicopter\" = 12\n\"Airship\" = 2\n\"Drone\" = 6\n";
  const auto p = plan_fixture(dir.path(), spec);
  const auto stats = dataset_stats(p.manifest);
  std::map<std::string, std::size_t> counts(stats.per_class.begin(), stats.per_class.end());
  EXPECT_EQ(counts["Large Airplane"], 10u);
  EXPECT_EQ(counts["Helicopter"], 12u);
  EXPECT_EQ(counts["Airship"], 2u);
  EXPECT_EQ(counts["Drone"], 6u);
  EXPECT_EQ(counts["Paraglider"], 0u);
  EXPECT_EQ(stats.total, 30u);
}

TEST(Plan, DiffusionItemsCarryPrompts) {
  TempDir dir;
  FixtureSpec spec;
  spec.extra = "";
  auto p = plan_fixture(dir.path(), spec);
  auto cfg = p.cfg.plan_config();
  cfg.backend = BackendDescriptor::remote(BackendKind::RemoteDiffusion, "http://127.0.0.1:1");
  const auto m = plan_dataset(cfg, p.backgrounds, p.train, p.heldout, 5);
  for (const auto& it : m.items) {
    ASSERT_TRUE(it.prompt);
    EXPECT_EQ(*it.prompt, build_prompt(cfg.palette.at(it.placement.class_id).class_name));
  }
}

TEST(Execute, WritesDatasetWithConsistentAnnotations) {
  TempDir dir;
  const auto p = plan_fixture(dir.path());
  const auto out = dir / "out";
  const auto res = execute_plan(p.manifest, p.manifest.backend, out, {2, false});
  EXPECT_TRUE(res.failures.empty());
  ASSERT_EQ(res.images.size(), 30u);
  ASSERT_EQ(res.annotations.size(), 30u);
  for (const auto& f : {"annotations.json", "stats.json", "failures.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;

  const auto coco = import_coco(out / "annotations.json");
  EXPECT_EQ(coco.annotations, res.annotations);
  for (const auto& a : res.annotations) {
    const auto it = std::find_if(p.manifest.items.begin(), p.manifest.items.end(),
                                 [&](const auto& i) { return i.item_id == a.image_id; });
    ASSERT_NE(it, p.manifest.items.end());
    const auto& img = *std::find_if(res.images.begin(), res.images.end(),
                                    [&](const auto& i) { return i.image_id == a.image_id; });
    EXPECT_TRUE(fs::exists(out / img.file_name));
    EXPECT_TRUE(fs::exists(out / "labels" / img.split / (img.image_id + ".txt")));
    // The tight box lies inside the mask rectangle in background coordinates.
    const auto& pl = it->placement;
    EXPECT_GE(a.bbox.x, pl.crop.x + pl.mask_rect.x);
    EXPECT_GE(a.bbox.y, pl.crop.y + pl.mask_rect.y);
    EXPECT_LE(a.bbox.x + a.bbox.w, pl.crop.x + pl.mask_rect.x + pl.mask_rect.w);
    EXPECT_LE(a.bbox.y + a.bbox.h, pl.crop.y + pl.mask_rect.y + pl.mask_rect.h);
    EXPECT_LE(a.bbox.x + a.bbox.w, img.width);
    EXPECT_LE(a.bbox.y + a.bbox.h, img.height);
    EXPECT_EQ(a.class_id, pl.class_id);
    EXPECT_EQ(a.object_id, pl.object_ref);
    EXPECT_EQ(a.backend_id, "procedural/v1");
    // Pixels outside the crop are untouched.
    const auto generated = read_image(out / img.file_name);
    const auto background = read_image(p.manifest.background(it->background_id).path);
    EXPECT_EQ(generated.at(pl.crop.x > 0 ? 0 : generated.width() - 1, generated.height() - 1),
              background.at(pl.crop.x > 0 ? 0 : background.width() - 1, background.height() - 1));
  }
  EXPECT_EQ(res.stats.total, 30u);
}

TEST(Execute, WorkerCountDoesNotChangeOutput) {
  TempDir dir;
  const auto p = plan_fixture(dir.path());
  execute_plan(p.manifest, p.manifest.backend, dir / "w1", {1, false});
  execute_plan(p.manifest, p.manifest.backend, dir / "w8", {8, false});
  EXPECT_EQ(sha256_tree(dir / "w1/images"), sha256_tree(dir / "w8/images"));
  EXPECT_EQ(sha256_tree(dir / "w1/labels"), sha256_tree(dir / "w8/labels"));
  EXPECT_EQ(sha256_file(dir / "w1/annotations.json"), sha256_file(dir / "w8/annotations.json"));
}

TEST(Execute, RefusesExistingOutputWithoutForce) {
  TempDir dir;
  const auto p = plan_fixture(dir.path());
  execute_plan(p.manifest, p.manifest.backend, dir / "o", {1, false});
  EXPECT_THROW(execute_plan(p.manifest, p.manifest.backend, dir / "o", {1, false}), Error);
  EXPECT_NO_THROW(execute_plan(p.manifest, p.manifest.backend, dir / "o", {1, true}));
}

TEST(Execute, BadItemIsIsolated) {
  TempDir dir;
  auto p = plan_fixture(dir.path());
  p.manifest.items[3].placement.crop.x = 100000;
  const auto res = execute_plan(p.manifest, p.manifest.backend, dir / "o", {2, false});
  ASSERT_EQ(res.failures.size(), 1u);
  EXPECT_EQ(res.failures[0].item_id, p.manifest.items[3].item_id);
  EXPECT_EQ(res.images.size(), 29u);
  const auto failures = nlohmann::json::parse(testing_support::read_text(dir / "o/failures.json"));
  EXPECT_EQ(failures.size(), 1u);
}

TEST(Execute, UnreachableBackendFailsEveryItem) {
  TempDir dir;
  auto p = plan_fixture(dir.path());
  int port;
  {
    StubServer probe;
    port = probe.port();
  }
  auto backend = BackendDescriptor::remote(BackendKind::RemoteMaskConditioned, "http://127.0.0.1:" + std::to_string(port));
  backend.timeout = std::chrono::milliseconds(300);
  const auto res = execute_plan(p.manifest, backend, dir / "o", {2, false});
  EXPECT_EQ(res.failures.size(), p.manifest.items.size());
  EXPECT_EQ(nlohmann::json::parse(testing_support::read_text(dir / "o/failures.json")).size(), p.manifest.items.size());
}

TEST(Execute, RemoteEchoBackendMatchesConditioningPatch) {
  TempDir dir;
  FixtureSpec spec;
  spec.train = 4;
  spec.val = spec.test = 1;
  auto p = plan_fixture(dir.path(), spec);
  StubServer stub;
  const auto res = execute_plan(p.manifest, BackendDescriptor::remote(BackendKind::RemoteMaskConditioned, stub.url()),
                                dir / "o", {2, false});
  EXPECT_TRUE(res.failures.empty());
  EXPECT_EQ(stub.generate_calls(), 6);
  for (const auto& a : res.annotations) EXPECT_EQ(a.backend_id, "stub/echo");
}

TEST(Execute, DiffusionBackendUsesWholePatchBoxes) {
  TempDir dir;
  FixtureSpec spec;
  spec.train = 3;
  spec.val = spec.test = 1;
  auto p = plan_fixture(dir.path(), spec);
  StubServer stub(BackendKind::RemoteDiffusion);
  const auto backend = BackendDescriptor::remote(BackendKind::RemoteDiffusion, stub.url());
  auto cfg = p.cfg.plan_config();
  cfg.backend = backend;
  auto m = plan_dataset(cfg, p.backgrounds, p.train, p.heldout, 3);
  const auto res = execute_plan(m, backend, dir / "o", {1, false});
  ASSERT_TRUE(res.failures.empty());
  for (const auto& a : res.annotations) {
    const auto& it = *std::find_if(m.items.begin(), m.items.end(), [&](const auto& i) { return i.item_id == a.image_id; });
    EXPECT_EQ(a.bbox, BBox::from_region(it.placement.crop));
  }
}
