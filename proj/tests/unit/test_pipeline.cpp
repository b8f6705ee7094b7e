#include <doctest.h>

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "support.hpp"
#include "voxlift/error.hpp"
#include "voxlift/pipeline.hpp"

using namespace voxlift;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config text parsing") {
    const auto kv = parse_config_text("# comment\nimage = \"a b.png\"  # trailing\n\niters = 10 # note\nseed=3\n");
    CHECK(kv.at("image") == "a b.png");
    CHECK(kv.at("iters") == "10");
    CHECK(kv.at("seed") == "3");
    CHECK_THROWS_AS(parse_config_text("novalue\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config_text("x = \"open\n"), InvalidArgument);
    CHECK_THROWS_AS(parse_config_text(" = 3\n"), InvalidArgument);
  }

  TEST_CASE("settings are applied and checked") {
    PipelineConfig cfg = default_pipeline_config();
    apply_setting(cfg, "iters", "12");
    apply_setting(cfg, "fov", "45");
    apply_setting(cfg, "resolution", "8,9,10");
    apply_setting(cfg, "box", "1,2,30,40");
    apply_setting(cfg, "weight_mode", "sqrt_one_minus_alpha_bar");
    CHECK(cfg.sds.iterations == 12);
    CHECK(cfg.sds.poses.fov_y == doctest::Approx(deg2rad(45)));
    CHECK(cfg.sds.resolution.nz == 10);
    CHECK(cfg.prompt->kind == PromptAnnotation::Kind::Box);
    CHECK(cfg.sds.weight_mode == WeightMode::SqrtOneMinusAlphaBar);
    CHECK_THROWS_AS(apply_setting(cfg, "no_such_key", "1"), InvalidArgument);
    CHECK_THROWS_AS(apply_setting(cfg, "iters", "ten"), InvalidArgument);
    CHECK_THROWS_AS(apply_setting(cfg, "backend", "magic"), InvalidArgument);
    CHECK_THROWS_AS(apply_setting(cfg, "resolution", "8,9"), InvalidArgument);
  }

  TEST_CASE("exported config text reads back to the same config") {
    testing::TempDir dir("cfg");
    PipelineConfig cfg = load_pipeline_config(write_fixture(dir.path(), 32, 7));
    apply_setting(cfg, "lr_density", "0.0123");
    apply_setting(cfg, "training_views", "sampled");
    apply_setting(cfg, "backend", "remote");
    apply_setting(cfg, "remote_url", "http://127.0.0.1:9");
    const std::string text = to_config_text(cfg);
    std::ofstream(dir / "again.toml") << text;
    const PipelineConfig back = load_pipeline_config(dir / "again.toml");
    CHECK(to_config_text(back) == text);
    CHECK(back.sds.iterations == 7);
    CHECK(back.sds.lr_density == 0.0123);
    CHECK(back.sds.training_poses.empty());
    CHECK(back.backend == BackendKind::Remote);
  }

  TEST_CASE("a missing input image fails before anything is written") {
    testing::TempDir dir("missing");
    PipelineConfig cfg = testing::small_pipeline(dir.path());
    cfg.image = dir / "nope.png";
    cfg.out_dir = dir / "never";
    try {
      run_pipeline(cfg);
      FAIL("expected failure");
    } catch (const StageError& e) {
      CHECK(e.stage() == "config");
    }
    CHECK_FALSE(fs::exists(dir / "never"));
  }

  TEST_CASE("prompt outside the image is a segment-stage failure") {
    testing::TempDir dir("prompt");
    PipelineConfig cfg = testing::small_pipeline(dir.path());
    cfg.prompt = PromptAnnotation::point(500, 2);
    try {
      run_pipeline(cfg);
      FAIL("expected failure");
    } catch (const StageError& e) {
      CHECK(e.stage() == "segment");
    }
    CHECK_FALSE(fs::exists(cfg.out_dir));
  }

  TEST_CASE("small run writes the full bundle and reports stages in order") {
    testing::TempDir dir("run");
    const PipelineConfig cfg = testing::small_pipeline(dir.path());
    std::vector<std::string> stages;
    int steps = 0;
    PipelineObserver obs;
    obs.on_stage = [&](const std::string& s) { stages.push_back(s); };
    obs.on_step = [&](const VoxelRadianceField&, const TraceRecord&) { ++steps; };
    const PipelineResult r = run_pipeline(cfg, obs);
    CHECK(stages == std::vector<std::string>{"config", "load", "segment", "crop", "oracle", "pointcloud", "sds",
                                             "render", "export"});
    CHECK(steps == 4);
    CHECK(r.trace.records.size() == 4);
    CHECK(r.held_out_psnr.has_value());
    CHECK_FALSE(r.caption.has_value());

    const fs::path out = cfg.out_dir;
    for (int k = 0; k < 5; ++k) {
      const Image v = load_image(out / "views" / ("view_" + std::to_string(k) + ".png"));
      CHECK(v.width() == 16);
    }
    CHECK_FALSE(fs::exists(out / "views" / "view_5.png"));
    CHECK(load_image(out / "patch.png").width() == 16);
    CHECK(fs::exists(out / "mask.png"));
    CHECK(encode_grid(import_grid(out / "field.vxrf")) == encode_grid(r.field));
    std::ifstream trace(out / "trace.jsonl");
    CHECK(TrainTrace::read_jsonl(trace).records.size() == 4);
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary["iterations"] == 4);
    CHECK(summary["view_azimuths_deg"] == nlohmann::json::array({0.0, 72.0, 144.0, 216.0, 288.0}));
    CHECK(summary["backend"] == "analytic");
    CHECK(to_config_text(load_pipeline_config(out / "config.toml")) == to_config_text(cfg));
  }

  TEST_CASE("two runs with the same seed produce identical grids") {
    testing::TempDir dir("det");
    PipelineConfig a = testing::small_pipeline(dir.path());
    PipelineConfig b = a;
    a.out_dir = dir / "a";
    b.out_dir = dir / "b";
    run_pipeline(a);
    run_pipeline(b);
    CHECK(slurp(dir / "a" / "field.vxrf") == slurp(dir / "b" / "field.vxrf"));
    CHECK(slurp(dir / "a" / "views" / "view_2.png") == slurp(dir / "b" / "views" / "view_2.png"));
  }
}
