#include <CLI11.hpp>
#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <iostream>

#include "voxlift/error.hpp"
#include "voxlift/fixture.hpp"
#include "voxlift/pipeline.hpp"
#include "voxlift/service.hpp"

using namespace voxlift;

namespace {

httplib::Server* g_server = nullptr;

void handle_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int cmd_reconstruct(const std::string& config_file, const std::vector<std::pair<std::string, std::string>>& overrides) {
  PipelineConfig cfg = default_pipeline_config();
  try {
    if (!config_file.empty()) cfg = load_pipeline_config(config_file, cfg);
    for (const auto& [k, v] : overrides) apply_setting(cfg, k, v);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const PipelineResult r = run_pipeline(cfg, {.on_stage = [](const std::string& s) { std::cerr << "[" << s << "]\n"; },
                                                .on_step = [&](const VoxelRadianceField&, const TraceRecord& rec) {
                                                  if ((rec.iteration + 1) % 100 == 0)
                                                    std::fprintf(stderr, "  iteration %d/%d proxy_loss %.5f\n",
                                                                 rec.iteration + 1, cfg.sds.iterations, rec.proxy_loss);
                                                }});
    std::cout << "wrote " << r.out_dir.string() << '\n';
    if (r.held_out_psnr) std::printf("held-out PSNR %.2f dB\n", *r.held_out_psnr);
    return 0;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.stage() << " failed: " << e.what() << '\n';
    return e.stage() == "config" ? 2 : 1;
  }
}

int cmd_serve(const std::string& addr, const std::string& jobs_root) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos) {
    std::cerr << "--addr must be host:port\n";
    return 2;
  }
  const std::string host = addr.substr(0, colon);
  const int port = std::stoi(addr.substr(colon + 1));
  JobService service({.jobs_root = jobs_root});
  httplib::Server server;
  service.mount(server);
  g_server = &server;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  if (!server.bind_to_port(host, port)) {
    std::cerr << "cannot bind " << addr << '\n';
    return 1;
  }
  std::cerr << "listening on " << addr << '\n';
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-image object reconstruction into a voxel radiance field"};
  app.require_subcommand(1);

  auto* rec = app.add_subcommand("reconstruct", "Run the pipeline on one image");
  std::string config_file;
  std::vector<std::pair<std::string, std::string>> overrides;
  rec->add_option("--config", config_file, "Config file (key = value); flags override it")->check(CLI::ExistingFile);
  auto flag_to = [&](const char* flag, const char* key, const char* help) {
    rec->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides.emplace_back(key, v); },
                                          help);
  };
  flag_to("--image", "image", "Input PNG");
  flag_to("--point", "point", "Point prompt x,y");
  flag_to("--box", "box", "Box prompt x0,y0,x1,y1");
  flag_to("--backend", "backend", "analytic or remote");
  flag_to("--remote-url", "remote_url", "Model-bridge base URL");
  flag_to("--iters", "iters", "SDS iterations");
  flag_to("--seed", "seed", "Random seed");
  flag_to("--out", "out", "Export directory");
  flag_to("--tau", "tau", "Region-growing colour threshold");
  rec->add_flag_callback("--remote-segment", [&] { overrides.emplace_back("remote_segment", "true"); },
                         "Segment with the model bridge instead of the local stand-in");
  std::vector<std::string> sets;
  rec->add_option("--set", sets, "Any config key as key=value");

  auto* serve = app.add_subcommand("serve", "Run the job API");
  std::string addr = "127.0.0.1:8080";
  std::string jobs_root = "voxlift-jobs";
  serve->add_option("--addr", addr, "host:port")->capture_default_str();
  serve->add_option("--jobs-root", jobs_root, "Directory for job exports")->capture_default_str();

  auto* rend = app.add_subcommand("render", "Render a VXRF grid from an orbit pose");
  std::string grid, out_png;
  double azimuth = 0.0, elevation = 0.0, radius = 2.3, fov = 60.0;
  int size = 256, samples = 128;
  rend->add_option("--grid", grid, "VXRF file")->required()->check(CLI::ExistingFile);
  rend->add_option("--azimuth", azimuth, "Degrees")->capture_default_str();
  rend->add_option("--elevation", elevation, "Degrees")->capture_default_str();
  rend->add_option("--out", out_png, "Output PNG")->required();
  rend->add_option("--size", size, "Square raster size")->capture_default_str()->check(CLI::Range(1, 4096));
  rend->add_option("--samples", samples, "Samples per ray")->capture_default_str()->check(CLI::Range(2, 4096));
  rend->add_option("--radius", radius, "Camera distance")->capture_default_str();
  rend->add_option("--fov", fov, "Vertical field of view in degrees")->capture_default_str();

  auto* fix = app.add_subcommand("fixture", "Write the bundled synthetic input image and config");
  std::string fixture_dir;
  int fixture_size = 160, fixture_iters = 2000;
  fix->add_option("--out", fixture_dir, "Directory")->required();
  fix->add_option("--size", fixture_size, "Input image size")->capture_default_str();
  fix->add_option("--iters", fixture_iters, "Iterations written to the config")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*rec) {
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
          std::cerr << "--set expects key=value\n";
          return 2;
        }
        overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      return cmd_reconstruct(config_file, overrides);
    }
    if (*serve) return cmd_serve(addr, jobs_root);
    if (*rend) {
      const VoxelRadianceField field = import_grid(grid);
      const CameraPose pose = make_pose(deg2rad(azimuth), deg2rad(elevation), radius, deg2rad(fov));
      save_image(render(field, pose, size, size, fixture::evaluation_settings(samples)).image, out_png);
      return 0;
    }
    if (*fix) {
      std::cout << write_fixture(fixture_dir, fixture_size, fixture_iters).string() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
