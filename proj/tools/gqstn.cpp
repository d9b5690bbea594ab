#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gqstn/config.hpp"
#include "gqstn/gradsuite.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gqstn;

// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

namespace {

RunConfig load_config(const std::string& path) {
  return path.empty() ? RunConfig::from_json(json::object()) : RunConfig::from_file(path);
}

struct LoadedData {
  std::vector<SceneRecord> train, val, test;
  DatasetStats stats;
  ImageMeta meta;
  json sidecar;
};

LoadedData load_data(const std::string& dir) {
  DatasetPaths p = dataset_paths(dir);
  LoadedData d;
  d.train = read_shard(p.train);
  d.val = read_shard(p.val);
  d.test = read_shard(p.test);
  std::ifstream is(p.sidecar);
  if (!is) throw TensorError("load_data: cannot open " + p.sidecar);
  is >> d.sidecar;
  d.stats.gamma = d.sidecar["stats"]["gamma"].get<double>();
  d.stats.z_mean = d.sidecar["stats"]["z_mean"].get<double>();
  d.stats.z_std = d.sidecar["stats"]["z_std"].get<double>();
  d.meta.height = d.sidecar["spec"]["height"].get<int64_t>();
  d.meta.width = d.sidecar["spec"]["width"].get<int64_t>();
  d.meta.pixel_scale = d.sidecar["spec"]["pixel_scale"].get<double>();
  d.meta.camera_height = d.sidecar["spec"]["camera_height"].get<double>();
  return d;
}

json stats_json(const DatasetStats& st) {
  return {{"gamma", st.gamma}, {"z_mean", st.z_mean}, {"z_std", st.z_std}};
}

json meta_json(const ImageMeta& m) {
  return {{"height", m.height}, {"width", m.width}, {"pixel_scale", m.pixel_scale},
          {"camera_height", m.camera_height}};
}

DatasetStats stats_from_meta(const json& j) {
  DatasetStats st;
  st.gamma = j["gamma"].get<double>();
  st.z_mean = j["z_mean"].get<double>();
  st.z_std = j["z_std"].get<double>();
  return st;
}

ImageMeta image_meta_from_json(const json& j) {
  ImageMeta m;
  m.height = j["height"].get<int64_t>();
  m.width = j["width"].get<int64_t>();
  m.pixel_scale = j["pixel_scale"].get<double>();
  m.camera_height = j["camera_height"].get<double>();
  return m;
}

json grasp_json(const GraspConfig& g) {
  return {{"x", g.x}, {"y", g.y}, {"theta", g.theta}, {"w", g.w}, {"z", g.z}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw TensorError("cannot open " + path + " for writing");
  os << j.dump(2) << "\n";
}

// 8-bit binary graymap with the predicted grasp rectangle traced in white.
void write_overlay_pgm(const std::string& path, const DepthImage& im, const GraspConfig& g) {
  const ImageMeta& m = im.meta;
  std::vector<uint8_t> px(im.depth.size());
  double lo = *std::min_element(im.depth.begin(), im.depth.end());
  double hi = *std::max_element(im.depth.begin(), im.depth.end());
  double span = hi > lo ? hi - lo : 1.0;
  for (size_t i = 0; i < px.size(); ++i)
    px[i] = uint8_t(std::lround(230.0 * (im.depth[i] - lo) / span));
  Polygon poly = rect_polygon(rect_from_grasp(g, m));
  for (size_t e = 0; e < poly.size(); ++e) {
    Vec2 a = poly[e], b = poly[(e + 1) % poly.size()];
    int steps = int(std::ceil(std::hypot(b.x - a.x, b.y - a.y))) * 2 + 1;
    for (int i = 0; i <= steps; ++i) {
      double t = double(i) / double(steps);
      int64_t x = int64_t(std::lround(a.x + t * (b.x - a.x)));
      int64_t y = int64_t(std::lround(a.y + t * (b.y - a.y)));
      if (x >= 0 && x < m.width && y >= 0 && y < m.height)
        px[size_t(y * m.width + x)] = 255;
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw TensorError("cannot open " + path + " for writing");
  os << "P5\n" << m.width << " " << m.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(px.data()), std::streamsize(px.size()));
}

// Single depth image from either a GQSD shard (first scene) or a PGM
// graymap (value/maxval * camera_height meters).
DepthImage read_input_image(const std::string& path, const ImageMeta& meta) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw TensorError("cannot open image " + path);
  char m0 = 0, m1 = 0;
  is.get(m0).get(m1);
  is.close();
  if (m0 == 'G' && m1 == 'Q') {
    auto records = read_shard(path);
    if (records.empty()) throw TensorError("GQSD shard " + path + " holds no scenes");
    return records[0].depth;
  }
  if (m0 == 'P' && (m1 == '2' || m1 == '5')) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    in >> magic;
    auto next_int = [&in, &path]() {
      // skip whitespace and # comments
      for (;;) {
        int c = in.peek();
        if (c == '#') { std::string line; std::getline(in, line); continue; }
        if (std::isspace(c)) { in.get(); continue; }
        break;
      }
      int64_t v;
      if (!(in >> v)) throw TensorError("malformed PGM header in " + path);
      return v;
    };
    int64_t w = next_int(), h = next_int(), maxval = next_int();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
      throw TensorError("malformed PGM header in " + path);
    DepthImage im;
    im.meta = meta;
    im.meta.width = w;
    im.meta.height = h;
    im.depth.resize(size_t(w * h));
    if (magic == "P2") {
      for (auto& d : im.depth) {
        int64_t v;
        if (!(in >> v)) throw TensorError("truncated P2 data in " + path);
        d = double(v) / double(maxval) * meta.camera_height;
      }
    } else {
      in.get();  // single whitespace after maxval
      int bytes = maxval > 255 ? 2 : 1;
      std::vector<uint8_t> raw(size_t(w * h * bytes));
      in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
      if (!in) throw TensorError("truncated P5 data in " + path);
      for (size_t i = 0; i < im.depth.size(); ++i) {
        int64_t v = bytes == 2 ? (int64_t(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
        im.depth[i] = double(v) / double(maxval) * meta.camera_height;
      }
    }
    return im;
  }
  throw TensorError("unrecognized image format in " + path +
                    ": expected a GQSD shard ('GQSD' magic) or a PGM graymap (P2/P5)");
}

const std::vector<SceneRecord>& pick_split(const LoadedData& d, const std::string& split) {
  if (split == "train") return d.train;
  if (split == "val") return d.val;
  if (split == "test") return d.test;
  throw TensorError("unknown split '" + split + "' (train|val|test)");
}

int run_command(const std::function<void()>& load_phase, const std::function<void()>& work_phase,
                int work_exit) {
  try {
    load_phase();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  try {
    work_phase();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return work_exit;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gqstn: one-shot grasp detection pipeline"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, quality_path, detector_path;
  std::string image_path, split = "test", report_path, overlay_dir, resume_path;
  uint64_t seed_override = 0;
  bool have_seed = false, allow_overlap = false;
  int cases = 100, gc_seed = 7;
  double gc_tol = 1e-4;
  std::vector<int> bench_ks = {100, 300, 1000};

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration JSON (defaults if omitted)");
  };
  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_override, "override the config seed for this command")
        ->each([&](const std::string&) { have_seed = true; });
  };

  auto* gen = app.add_subcommand("gen-data", "generate synthetic GQSD shards + sidecar");
  add_config(gen);
  add_seed(gen);
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* tq = app.add_subcommand("train-quality", "train the grasp-robustness classifier");
  add_config(tq);
  add_seed(tq);
  tq->add_option("--data", data_dir, "dataset directory")->required();
  tq->add_option("--out", out_dir, "output directory")->required();

  auto* td = app.add_subcommand("train-detector", "train the GQ-STN detector");
  add_config(td);
  add_seed(td);
  td->add_option("--data", data_dir, "dataset directory")->required();
  td->add_option("--quality", quality_path,
                 "frozen robustness classifier checkpoint (train it first with train-quality; "
                 "the detector's robustness loss depends on it)")->required();
  td->add_option("--out", out_dir, "output directory")->required();
  td->add_option("--resume", resume_path, "resume from a phase checkpoint");

  auto* tb = app.add_subcommand("train-baseline", "train the DirectGrasp regression baseline");
  add_config(tb);
  add_seed(tb);
  tb->add_option("--data", data_dir, "dataset directory")->required();
  tb->add_option("--out", out_dir, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a detector checkpoint on a dataset split");
  add_config(ev);
  ev->add_option("--detector", detector_path, "detector checkpoint (gqstn or directgrasp)");
  ev->add_option("--quality", quality_path, "robustness classifier checkpoint")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--split", split, "train|val|test (default test)");
  ev->add_flag("--allow-overlap", allow_overlap, "permit evaluating on the training split");
  ev->add_option("--out", report_path, "write the report JSON here as well as stdout");
  ev->add_option("--overlay-dir", overlay_dir, "write per-scene PGM overlays here");
  bool eval_baseline = false;
  ev->add_flag("--prop-classify", eval_baseline,
               "evaluate the propose+classify sampling baseline instead of a checkpoint");

  auto* pr = app.add_subcommand("predict", "one grasp from one image, JSON on stdout");
  pr->add_option("--image", image_path, "GQSD shard (first scene) or PGM graymap")->required();
  pr->add_option("--detector", detector_path, "detector checkpoint")->required();
  pr->add_option("--quality", quality_path, "robustness classifier checkpoint")->required();

  auto* be = app.add_subcommand("bench", "timing: one-shot detector vs sampling baseline");
  add_config(be);
  be->add_option("--detector", detector_path, "detector checkpoint")->required();
  be->add_option("--quality", quality_path, "robustness classifier checkpoint")->required();
  be->add_option("--data", data_dir, "dataset directory")->required();
  be->add_option("--ks", bench_ks, "candidate counts for the sampling baseline");
  be->add_option("--out", report_path, "write the timing JSON here as well as stdout");

  auto* gc = app.add_subcommand("grad-check", "finite-difference sweep over the op set");
  gc->add_option("--cases", cases, "seeded cases per op (default 100)");
  gc->add_option("--seed", gc_seed, "root seed");
  gc->add_option("--tol", gc_tol, "relative-error tolerance");

  CLI11_PARSE(app, argc, argv);

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (gen->parsed()) {
    uint64_t seed = have_seed ? seed_override : cfg.seed_dataset;
    return run_command(
        [&] { fs::create_directories(out_dir); },
        [&] {
          DatasetPaths paths = build_dataset(cfg.dataset, seed, out_dir);
          std::ifstream is(paths.sidecar);
          json side;
          is >> side;
          is.close();
          side["config"] = cfg.echo;  // provenance echo
          write_json(paths.sidecar, side);
          json out = {{"gamma", side["stats"]["gamma"]}, {"splits", side["splits"]},
                      {"seed", seed}, {"out", out_dir}};
          std::cout << out.dump(2) << "\n";
        },
        kExitData);
  }

  if (tq->parsed()) {
    uint64_t seed = have_seed ? seed_override : cfg.seed_quality;
    LoadedData d;
    return run_command(
        [&] {
          d = load_data(data_dir);
          fs::create_directories(out_dir);
        },
        [&] {
          auto examples = crop_examples(d.train, d.stats);
          cfg.quality.backbone.in_channels = 2;
          auto [model, rep] = train_classifier(examples, cfg.quality, seed, d.meta);
          model.table_depth = d.meta.table_depth();
          model.camera_height = d.meta.camera_height;
          json meta = {{"config", cfg.echo}, {"seed", seed}, {"stats", stats_json(d.stats)},
                       {"image_meta", meta_json(d.meta)}};
          save_quality(out_dir + "/quality.gqtn", model, meta);
          json report = {{"accuracy", rep.accuracy}, {"precision", rep.precision},
                         {"recall", rep.recall}, {"n_train", rep.n_train},
                         {"n_val", rep.n_val}, {"epoch_loss", rep.epoch_loss},
                         {"seed", seed}, {"config", cfg.echo}};
          write_json(out_dir + "/quality_report.json", report);
          report.erase("config");
          std::cout << report.dump(2) << "\n";
        },
        kExitNumeric);
  }

  if (td->parsed() || tb->parsed()) {
    bool is_gqstn = td->parsed();
    uint64_t seed = have_seed ? seed_override : cfg.seed_detector;
    LoadedData d;
    QualityModel quality;
    return run_command(
        [&] {
          d = load_data(data_dir);
          if (is_gqstn) {
            quality = load_quality(quality_path);
            quality.freeze();
          }
          fs::create_directories(out_dir);
        },
        [&] {
          cfg.detector.backbone.input_h = d.meta.height;
          cfg.detector.backbone.input_w = d.meta.width;
          TrainOptions opts;
          opts.history_path = out_dir + "/history.jsonl";
          opts.checkpoint_dir = out_dir;
          json meta = {{"config", cfg.echo}, {"seed", seed}, {"stats", stats_json(d.stats)},
                       {"image_meta", meta_json(d.meta)}};
          json summary;
          if (is_gqstn) {
            GqstnDetector model(cfg.detector, seed);
            TrainState state;
            TrainState* statep = nullptr;
            if (!resume_path.empty()) {
              state = resume_gqstn(resume_path, model);
              statep = &state;
            }
            TrainResult res = train_gqstn(model, d.train, d.val, d.stats, quality,
                                          cfg.schedule, seed, opts, statep);
            meta["final_val_robust"] = res.final_val_robust;
            save_detector(out_dir + "/detector.gqtn", model, meta);
            summary = {{"checkpoint", out_dir + "/detector.gqtn"},
                       {"final_val_robust", res.final_val_robust},
                       {"early_stopped", res.early_stopped},
                       {"history", opts.history_path}, {"seed", seed}};
          } else {
            DirectGraspModel model(cfg.detector, seed);
            TrainResult res = train_directgrasp(model, d.train, d.val, d.stats,
                                                cfg.schedule, seed, opts);
            save_directgrasp(out_dir + "/baseline.gqtn", model, meta);
            summary = {{"checkpoint", out_dir + "/baseline.gqtn"},
                       {"history", opts.history_path}, {"seed", seed}};
          }
          std::cout << summary.dump(2) << "\n";
        },
        kExitNumeric);
  }

  if (ev->parsed()) {
    if (split == "train" && !allow_overlap) {
      std::cerr << "error: refusing to evaluate on the training split; "
                   "pass --allow-overlap to override\n";
      return kExitUsage;
    }
    if (!eval_baseline && detector_path.empty()) {
      std::cerr << "error: eval needs --detector (or --prop-classify)\n";
      return kExitUsage;
    }
    LoadedData d;
    QualityModel quality;
    Checkpoint det_ck;
    return run_command(
        [&] {
          d = load_data(data_dir);
          quality = load_quality(quality_path);
          quality.freeze();
          if (!eval_baseline) det_ck = load_checkpoint(detector_path);
          if (!overlay_dir.empty()) fs::create_directories(overlay_dir);
        },
        [&] {
          const auto& scenes = pick_split(d, split);
          GqstnDetector gq;
          DirectGraspModel dg;
          DetectorFn fn;
          std::string kind = eval_baseline ? "prop_classify" : det_ck.meta.value("kind", "");
          if (kind == "gqstn") {
            gq = load_detector(detector_path);
            fn = gqstn_detector_fn(gq, d.stats);
          } else if (kind == "directgrasp") {
            dg = load_directgrasp(detector_path);
            fn = directgrasp_detector_fn(dg, d.stats);
          } else if (kind == "prop_classify") {
            uint64_t seed = cfg.seed_baseline;
            BaselineConfig bcfg = cfg.baseline;
            DatasetStats stats = d.stats;
            const QualityModel* q = &quality;
            size_t counter = 0;
            fn = [bcfg, stats, q, seed, &counter](const DepthImage& im) {
              BaselineResult r =
                  prop_classify_baseline(im, *q, stats, bcfg, derive_seed(seed, counter++));
              return Detection{r.grasp, Tensor(), (r.grasp.z - stats.z_mean) / stats.z_std};
            };
          } else {
            throw TensorError("checkpoint " + detector_path + " is not a detector (kind '" +
                              kind + "')");
          }
          EvalReport rep = eval_detector(fn, scenes, d.stats, quality);
          json out = rep.to_json();
          out["detector"] = eval_baseline ? "prop_classify" : detector_path;
          out["quality"] = quality_path;
          out["split"] = split;
          out["n_scenes"] = scenes.size();
          out["config"] = cfg.echo;
          if (!overlay_dir.empty()) {
            for (size_t i = 0; i < scenes.size(); ++i) {
              Detection det = fn(scenes[i].depth);
              write_overlay_pgm(overlay_dir + "/scene" + std::to_string(i) + ".pgm",
                                scenes[i].depth, det.grasp);
            }
          }
          if (!report_path.empty()) write_json(report_path, out);
          json brief = out;
          brief.erase("scenes");
          brief.erase("config");
          std::cout << brief.dump(2) << "\n";
        },
        kExitNumeric);
  }

  if (pr->parsed()) {
    QualityModel quality;
    Checkpoint det_ck;
    DepthImage im;
    return run_command(
        [&] {
          det_ck = load_checkpoint(detector_path);
          quality = load_quality(quality_path);
          quality.freeze();
          im = read_input_image(image_path,
                                image_meta_from_json(det_ck.meta.at("image_meta")));
        },
        [&] {
          DatasetStats stats = stats_from_meta(det_ck.meta.at("stats"));
          std::string kind = det_ck.meta.value("kind", "");
          GraspConfig g;
          Tensor crop;
          double z_raw = 0;
          if (kind == "gqstn") {
            GqstnDetector model = load_detector(detector_path);
            DetectorOutput o = model.forward(depth_tensor(im), im.meta, stats);
            g = model.grasp(o, im.meta, stats);
            crop = o.crop;
            z_raw = o.wz.item();
          } else if (kind == "directgrasp") {
            DirectGraspModel model = load_directgrasp(detector_path);
            DetectorOutput o = model.forward(depth_tensor(im), im.meta, stats);
            g = model.grasp(o, im.meta, stats);
            crop = crop_for_classifier(im, g, stats);
            z_raw = o.wz.item();
          } else {
            throw TensorError("checkpoint " + detector_path + " is not a detector");
          }
          double p = classify(quality, crop, Tensor::scalar(z_raw)).second;
          json out = {{"grasp", grasp_json(g)}, {"p_robust", p},
                      {"robust", p > quality.threshold}};
          std::cout << out.dump(2) << "\n";
        },
        kExitNumeric);
  }

  if (be->parsed()) {
    LoadedData d;
    QualityModel quality;
    Checkpoint det_ck;
    return run_command(
        [&] {
          d = load_data(data_dir);
          quality = load_quality(quality_path);
          quality.freeze();
          det_ck = load_checkpoint(detector_path);
        },
        [&] {
          if (d.test.empty()) throw TensorError("bench: test split is empty");
          const DepthImage& im = d.test[0].depth;
          std::string kind = det_ck.meta.value("kind", "");
          DetectorFn fn;
          GqstnDetector gq;
          DirectGraspModel dg;
          if (kind == "gqstn") {
            gq = load_detector(detector_path);
            fn = gqstn_detector_fn(gq, d.stats);
          } else if (kind == "directgrasp") {
            dg = load_directgrasp(detector_path);
            fn = directgrasp_detector_fn(dg, d.stats);
          } else {
            throw TensorError("checkpoint " + detector_path + " is not a detector");
          }
          json out;
          TimingStats det = timing_bench([&] { (void)fn(im); }, cfg.bench_warmup,
                                         cfg.bench_reps);
          out["detector"] = {{"median_sec", det.median_sec}, {"p95_sec", det.p95_sec},
                             {"mean_sec", det.mean_sec}, {"reps", det.reps}};
          std::vector<double> xs, ys;
          out["prop_classify"] = json::array();
          for (int k : bench_ks) {
            BaselineConfig bcfg = cfg.baseline;
            bcfg.k = k;
            size_t counter = 0;
            TimingStats ts = timing_bench(
                [&] {
                  (void)prop_classify_baseline(im, quality, d.stats, bcfg,
                                               derive_seed(cfg.seed_baseline, counter++));
                },
                1, std::max(10, cfg.bench_reps / 3));
            out["prop_classify"].push_back({{"k", k}, {"median_sec", ts.median_sec},
                                            {"p95_sec", ts.p95_sec}, {"mean_sec", ts.mean_sec}});
            xs.push_back(double(k));
            ys.push_back(ts.median_sec);
          }
          out["k_linearity_r2"] = linear_fit_r2(xs, ys);
          out["speedup_vs_k1000"] = [&] {
            for (size_t i = 0; i < xs.size(); ++i)
              if (xs[i] == 1000.0) return ys[i] / det.median_sec;
            return 0.0;
          }();
          out["config"] = cfg.echo;
          if (!report_path.empty()) write_json(report_path, out);
          json brief = out;
          brief.erase("config");
          std::cout << brief.dump(2) << "\n";
        },
        kExitNumeric);
  }

  if (gc->parsed()) {
    bool all_pass = true;
    try {
      auto res = run_grad_suite(cases, uint64_t(gc_seed));
      for (const auto& oc : res) {
        bool pass = oc.pass && oc.worst.max_rel_err < gc_tol;
        all_pass = all_pass && pass;
        std::cout << (pass ? "PASS " : "FAIL ") << oc.name << "  cases=" << oc.cases
                  << "  worst: " << oc.worst.to_string() << "\n";
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitNumeric;
    }
    return all_pass ? 0 : kExitNumeric;
  }

  return 0;
}
