#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "objguide/io.hpp"
#include "objguide/pipeline.hpp"
#include "objguide/synth.hpp"

namespace objguide::cli {

namespace fs = std::filesystem;

namespace {

struct PipelineFlags {
  std::size_t k_candidates = 5;
  double iou_thresh = 0.5;
  double r_search = 20.0;
  double angle_thresh = 2.0;
  double min_seg_len = 20.0;
  double gem_p = 3.0;
  double ratio = 0.8;
  std::string mode = "(O+R)A";
  std::uint64_t seed = 0;
  std::optional<double> vp_weight;
  bool no_vp_constraint = false;
  bool no_additional = false;

  PipelineConfig config() const {
    PipelineConfig cfg;
    cfg.vp.angle_thresh_deg = angle_thresh;
    cfg.vp.seed = seed;
    cfg.match.k_candidates = k_candidates;
    cfg.match.eps_iou = iou_thresh;
    cfg.match.r_search = r_search;
    cfg.match.gem_p = gem_p;
    cfg.match.ratio = ratio;
    cfg.mode = *parse_box_mode(mode);
    cfg.vp_constraint = !no_vp_constraint;
    cfg.additional_features = !no_additional;
    cfg.min_seg_len = min_seg_len;
    cfg.vp_weight = vp_weight;
    return cfg;
  }
};

void add_vp_flags(CLI::App* app, PipelineFlags& f) {
  app->add_option("--angle-thresh", f.angle_thresh, "VP inlier angle threshold (deg)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--min-seg-len", f.min_seg_len, "Minimum segment length (px)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  app->add_option("--seed", f.seed, "RANSAC seed")->capture_default_str();
}

void add_pipeline_flags(CLI::App* app, PipelineFlags& f) {
  add_vp_flags(app, f);
  app->add_option("--k-candidates", f.k_candidates, "Retrieval candidates per box")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--iou-thresh", f.iou_thresh, "Box-correspondence IoU threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--r-search", f.r_search, "Guided search radius (px)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--gem-p", f.gem_p, "GeM pooling exponent")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--ratio", f.ratio, "Ratio test threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--mode", f.mode, "Box mode: O, OA, R, RA, O+R, (O+R)A")
      ->capture_default_str()
      ->check(CLI::Validator(
          [](std::string& s) {
            return parse_box_mode(s) ? std::string() : "unknown box mode '" + s + "'";
          },
          "MODE"));
  app->add_option("--vp-weight", f.vp_weight, "Weight of VP rows in refinement")
      ->check(CLI::NonNegativeNumber);
  app->add_flag("--no-vp-constraint", f.no_vp_constraint, "Refine without VP rows");
  app->add_flag("--no-additional", f.no_additional, "Skip descriptor-only matches");
}

// VP inlier ids refer to the length-filtered list; map them back to the
// caller's segment indices.
std::vector<VanishingPoint> with_input_ids(std::vector<VanishingPoint> vps,
                                           std::span<const LineSegment> segments,
                                           double min_len) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].length() >= min_len) kept.push_back(i);
  }
  for (auto& vp : vps) {
    for (auto& id : vp.inliers) id = kept[id];
  }
  return vps;
}

std::vector<LineSegment> read_segments_of(const fs::path& dir) {
  return io::read_segments(io::read_file(dir / "segments.txt"), (dir / "segments.txt").string());
}

ImageSize read_size_of(const fs::path& dir) {
  return io::read_image_size(io::read_file(dir / "image.txt"), (dir / "image.txt").string());
}

std::string stage_report(const PairResult& r, const PipelineConfig& cfg) {
  std::ostringstream os;
  const auto boxes = [&](const char* key, const ImageAnalysis& a) {
    os << key << " O " << a.streams.orthogonal.size() << " OA " << a.streams.adjusted.size()
       << " R " << a.streams.rectified.size() << " RA " << a.streams.rectified_adjusted.size()
       << " merged " << a.boxes.size() << '\n';
  };
  os << "mode " << to_string(cfg.mode) << '\n';
  os << "vps1 " << r.counts.vps1 << '\n';
  os << "vps2 " << r.counts.vps2 << '\n';
  boxes("boxes1", r.image1);
  boxes("boxes2", r.image2);
  os << "groups " << r.counts.groups << '\n';
  os << "refined " << r.counts.refined << '\n';
  os << "guided " << r.counts.guided << '\n';
  os << "additional " << r.counts.additional << '\n';
  os << "matches " << r.matches.matches.size() << '\n';
  return os.str();
}

// Runs one pair and writes its files; returns the report text.
std::string match_one(const fs::path& dir1, const fs::path& dir2, const fs::path& out,
                      const PipelineConfig& cfg) {
  const ImageInputs in1 = io::read_image_dir(dir1);
  const ImageInputs in2 = io::read_image_dir(dir2);
  const PairResult r = match_pair(in1, in2, cfg);
  const auto groups = io::group_records(r.matches.groups);
  const std::string report = stage_report(r, cfg);
  io::write_file(out / "matches.txt", io::write_matches(r.matches.matches));
  io::write_file(out / "groups.txt", io::write_groups(groups));
  io::write_file(out / "quads1.txt", io::write_quads(r.image1.boxes));
  io::write_file(out / "quads2.txt", io::write_quads(r.image2.boxes));
  io::write_file(out / "vps1.txt",
                 io::write_vps(with_input_ids(r.image1.vps, in1.segments, cfg.min_seg_len)));
  io::write_file(out / "vps2.txt",
                 io::write_vps(with_input_ids(r.image2.vps, in2.segments, cfg.min_seg_len)));
  io::write_file(out / "report.txt", report);
  return report;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kParse: return kExitParse;
    case ErrorCode::kDimensionMismatch: return kExitDimension;
    default: return kExitFailure;
  }
}

struct BatchEntry {
  fs::path dir1;
  fs::path dir2;
  std::string name;
};

// Pairs file: one "dir1 dir2 name" record per line; '#' starts a comment.
// Relative directories resolve against the pairs file's directory.
std::vector<BatchEntry> read_pairs(const fs::path& file) {
  const std::string text = io::read_file(file);
  const fs::path base = file.parent_path();
  std::vector<BatchEntry> entries;
  std::istringstream lines(text);
  std::string line;
  for (int n = 1; std::getline(lines, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    BatchEntry e;
    std::string a, b, extra;
    if (!(fields >> a)) continue;
    if (!(fields >> b >> e.name) || (fields >> extra)) {
      throw Error(ErrorCode::kParse,
                  file.string() + ":" + std::to_string(n) + ": expected 'dir1 dir2 name'");
    }
    if (e.name.find('/') != std::string::npos || e.name == "." || e.name == "..") {
      throw Error(ErrorCode::kParse,
                  file.string() + ":" + std::to_string(n) + ": invalid pair name '" + e.name + "'");
    }
    e.dir1 = fs::path(a).is_absolute() ? fs::path(a) : base / a;
    e.dir2 = fs::path(b).is_absolute() ? fs::path(b) : base / b;
    entries.push_back(std::move(e));
  }
  return entries;
}

struct BatchOutcome {
  std::string report;
  std::string error;
  int code = kExitOk;
};

int run_batch(const fs::path& pairs_file, const fs::path& out, const PipelineConfig& cfg,
              unsigned jobs, std::ostream& err) {
  const auto entries = read_pairs(pairs_file);
  std::vector<BatchOutcome> outcomes(entries.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < entries.size(); k = next++) {
      const BatchEntry& e = entries[k];
      BatchOutcome& o = outcomes[k];
      try {
        o.report = match_one(e.dir1, e.dir2, out / e.name, cfg);
      } catch (const Error& ex) {
        o.code = exit_code_for(ex);
        o.error = ex.what();
      } catch (const std::exception& ex) {
        o.code = kExitFailure;
        o.error = ex.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(entries.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string report;
  int code = kExitOk;
  std::size_t ok = 0;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const BatchOutcome& o = outcomes[k];
    report += "pair " + entries[k].name + '\n';
    if (o.code == kExitOk) {
      report += o.report;
      ++ok;
    } else {
      report += "error " + o.error + '\n';
      err << "error: " << entries[k].name << ": " << o.error << '\n';
      if (code == kExitOk) code = o.code;
    }
  }
  report += "pairs " + std::to_string(entries.size()) + " ok " + std::to_string(ok) + '\n';
  io::write_file(out / "report.txt", report);
  return code;
}

std::optional<synth::SceneSpec> scene_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "single") return synth::single_plane_scene(seed);
  if (name == "two-facade") return synth::two_facade_scene(seed);
  if (name == "slanted") {
    // Right facade turned far from the camera; the original-frame detector
    // misses tilted windows, the rectified-frame detector sees them.
    synth::SceneSpec spec = synth::two_facade_scene(seed, 40.0, 62.0);
    spec.detector.max_tilt_deg = 12.0;
    spec.detector.rectified_boxes = true;
    spec.detector.vp.seed = seed;
    return spec;
  }
  if (name == "grid") return synth::repeated_grid_scene(seed);
  if (name == "day-night") return synth::day_night_scene(seed);
  return std::nullopt;
}

std::vector<VanishingPoint> true_vps(std::span<const synth::TrueVp> vps) {
  std::vector<VanishingPoint> out;
  for (const auto& v : vps) out.push_back({v.point, {}, v.orientation});
  return out;
}

void write_synth(const synth::SyntheticPair& s, const fs::path& out) {
  io::write_image_dir(out / "view1", s.views[0]);
  io::write_image_dir(out / "view2", s.views[1]);
  const fs::path truth = out / "truth";
  io::write_file(truth / "box_pairs.txt", io::write_box_pairs(s.truth.box_pairs));
  std::vector<io::FeatureTruthRecord> ft;
  for (const auto& f : s.truth.features) ft.push_back({f.plane, f.counterpart.value_or(-1), f.position2});
  io::write_file(truth / "feature_truth.txt", io::write_feature_truth(ft));
  std::vector<io::PlaneHomography> planes;
  for (std::size_t p = 0; p < s.truth.plane_h12.size(); ++p) {
    planes.push_back({static_cast<int>(p), s.truth.plane_h12[p]});
  }
  io::write_file(truth / "planes.txt", io::write_plane_homographies(planes));
  for (int v = 0; v < 2; ++v) {
    const std::string k = std::to_string(v + 1);
    io::write_file(truth / ("columns" + k + ".txt"), io::write_columns(s.truth.columns[v]));
    io::write_file(truth / ("vps" + k + ".txt"), io::write_vps(true_vps(s.truth.vps[v])));
  }
}

void write_rectify(const fs::path& in, const fs::path& out, const PipelineFlags& f) {
  const ImageSize size = read_size_of(in);
  const auto segments = read_segments_of(in);
  const PipelineConfig cfg = f.config();
  const auto kept = filter_short_segments(segments, cfg.min_seg_len);
  const auto vps = classify(estimate_vps(kept, cfg.vp), size, cfg.vp);
  const PlaneLayout layout = rectify_planes(kept, vps, size, cfg.seg);

  std::vector<io::PlaneHomography> rectifiers;
  for (const auto& r : layout.rectifiers) {
    if (r) rectifiers.push_back({r->plane_id, r->h});
  }
  // Each detection, mapped into the rectified frame of the plane owning its
  // center column, as the axis-aligned box a rectified detector would give.
  std::vector<TaggedQuad> rect_quads;
  if (fs::exists(in / "boxes.txt")) {
    const auto boxes = io::read_boxes(io::read_file(in / "boxes.txt"), (in / "boxes.txt").string());
    for (const auto& b : boxes) {
      const double cx = b.center().x();
      const auto col = std::find_if(layout.columns.begin(), layout.columns.end(),
                                    [&](const ColumnInterval& c) { return cx >= c.lo && cx < c.hi; });
      if (col == layout.columns.end()) continue;
      const auto k = static_cast<std::size_t>(col->plane_id);
      if (k >= layout.rectifiers.size() || !layout.rectifiers[k]) continue;
      const Homography& h = layout.rectifiers[k]->h;
      std::optional<DetBox> hull;
      for (const auto& c : QuadBox(b).corners()) {
        const auto m = h.map(c);
        if (!m) {
          hull.reset();
          break;
        }
        if (!hull) {
          hull = DetBox{m->x(), m->y(), m->x(), m->y(), b.score};
        } else {
          hull->xmin = std::min(hull->xmin, m->x());
          hull->ymin = std::min(hull->ymin, m->y());
          hull->xmax = std::max(hull->xmax, m->x());
          hull->ymax = std::max(hull->ymax, m->y());
        }
      }
      if (!hull || !(hull->xmin < hull->xmax && hull->ymin < hull->ymax)) continue;
      rect_quads.push_back({QuadBox(*hull), FrameTag{col->plane_id}});
    }
  }
  io::write_file(out / "vps.txt", io::write_vps(with_input_ids(vps, segments, cfg.min_seg_len)));
  io::write_file(out / "columns.txt", io::write_columns(layout.columns));
  io::write_file(out / "rectifiers.txt", io::write_plane_homographies(rectifiers));
  io::write_file(out / "rect_quads.txt", io::write_quads(rect_quads));
}

void print_eval(const fs::path& synth_dir, const fs::path& match_dir, double tol,
                std::ostream& out) {
  const auto load = [](const fs::path& p) { return io::read_file(p); };
  const fs::path truth_dir = synth_dir / "truth";
  const auto feats1 = io::read_features(load(synth_dir / "view1" / "features.txt"),
                                        (synth_dir / "view1" / "features.txt").string());
  const auto feats2 = io::read_features(load(synth_dir / "view2" / "features.txt"),
                                        (synth_dir / "view2" / "features.txt").string());
  const auto records = io::read_feature_truth(load(truth_dir / "feature_truth.txt"),
                                              (truth_dir / "feature_truth.txt").string());
  const auto planes = io::read_plane_homographies(load(truth_dir / "planes.txt"),
                                                  (truth_dir / "planes.txt").string());
  const auto matches = io::read_matches(load(match_dir / "matches.txt"),
                                        (match_dir / "matches.txt").string());
  const auto groups = io::to_groups(io::read_groups(load(match_dir / "groups.txt"),
                                                    (match_dir / "groups.txt").string()));
  std::vector<QuadBox> boxes1;
  if (fs::exists(match_dir / "quads1.txt")) {
    for (const auto& tq : io::read_quads(load(match_dir / "quads1.txt"),
                                         (match_dir / "quads1.txt").string())) {
      boxes1.push_back(tq.quad);
    }
  }

  synth::GroundTruth truth;
  for (const auto& r : records) {
    synth::FeatureTruth t;
    t.plane = r.plane;
    if (r.counterpart >= 0) t.counterpart = r.counterpart;
    t.position2 = r.position2;
    truth.features.push_back(t);
  }
  for (const auto& p : planes) {
    if (p.plane_id < 0) continue;
    const auto k = static_cast<std::size_t>(p.plane_id);
    if (truth.plane_h12.size() <= k) truth.plane_h12.resize(k + 1);
    truth.plane_h12[k] = p.h;
  }
  for (const auto& t : truth.features) {
    if (t.plane >= static_cast<int>(truth.plane_h12.size())) {
      throw Error(ErrorCode::kParse, "feature_truth.txt: plane " + std::to_string(t.plane) +
                                         " missing from planes.txt");
    }
  }
  const synth::Score sc = synth::score(matches, groups, feats1, feats2, truth, tol, boxes1);
  out << "precision " << io::format_real(sc.precision) << '\n';
  out << "recall " << io::format_real(sc.recall) << '\n';
  out << "correct " << sc.correct << '\n';
  out << "matches " << sc.total << '\n';
  out << "ground_truth_pairs " << sc.ground_truth_pairs << '\n';
  for (std::size_t g = 0; g < sc.homography_error.size(); ++g) {
    out << "homography_error " << g << ' ' << io::format_real(sc.homography_error[g]) << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Object-guided local feature matching", "objguide"};
  app.require_subcommand(1);

  PipelineFlags flags;
  std::string dir1, dir2, output, batch_file;
  unsigned jobs = 1;
  auto* match = app.add_subcommand("match", "Match one image pair or a batch of pairs");
  match->add_option("dir1", dir1, "Image 1 directory");
  match->add_option("dir2", dir2, "Image 2 directory");
  match->add_option("--batch", batch_file, "Pairs file: 'dir1 dir2 name' per line");
  match->add_option("--jobs", jobs, "Parallel pairs in batch mode")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  match->add_option("-o,--output", output, "Output directory")->required();
  add_pipeline_flags(match, flags);

  std::string input;
  auto* vps = app.add_subcommand("vps", "Estimate and classify vanishing points");
  vps->add_option("dir", input, "Image directory (image.txt, segments.txt)")->required();
  vps->add_option("-o,--output", output, "Output directory")->required();
  add_vp_flags(vps, flags);

  auto* rectify = app.add_subcommand("rectify", "Segment planes and build rectifiers");
  rectify->add_option("dir", input, "Image directory (image.txt, segments.txt[, boxes.txt])")
      ->required();
  rectify->add_option("-o,--output", output, "Output directory")->required();
  add_vp_flags(rectify, flags);

  std::string scene = "two-facade";
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic image pair with truth");
  synth_cmd->add_option("--scene", scene, "single, two-facade, slanted, grid, day-night")
      ->capture_default_str()
      ->check(CLI::IsMember({"single", "two-facade", "slanted", "grid", "day-night"}));
  synth_cmd->add_option("--seed", synth_seed, "Scene seed")->capture_default_str();
  synth_cmd->add_option("-o,--output", output, "Output directory")->required();

  std::string synth_dir, match_dir;
  double tol = 3.0;
  auto* eval = app.add_subcommand("eval", "Score matches against synthetic truth");
  eval->add_option("synth_dir", synth_dir, "Directory written by synth")->required();
  eval->add_option("match_dir", match_dir, "Directory written by match")->required();
  eval->add_option("--tol", tol, "Correctness tolerance (px)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
    if (match->parsed()) {
      const bool pair = !dir1.empty() && !dir2.empty();
      if (batch_file.empty() == !pair) {
        throw CLI::ValidationError("match", "give either dir1 dir2 or --batch");
      }
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (match->parsed()) {
      const PipelineConfig cfg = flags.config();
      if (!batch_file.empty()) return run_batch(batch_file, output, cfg, jobs, err);
      out << match_one(dir1, dir2, output, cfg);
    } else if (vps->parsed()) {
      const PipelineConfig cfg = flags.config();
      const ImageSize size = read_size_of(input);
      const auto segments = read_segments_of(input);
      const auto found = classify(
          estimate_vps(filter_short_segments(segments, cfg.min_seg_len), cfg.vp), size, cfg.vp);
      io::write_file(fs::path(output) / "vps.txt",
                     io::write_vps(with_input_ids(found, segments, cfg.min_seg_len)));
    } else if (rectify->parsed()) {
      write_rectify(input, output, flags);
    } else if (synth_cmd->parsed()) {
      write_synth(synth::generate(*scene_by_name(scene, synth_seed)), output);
    } else if (eval->parsed()) {
      print_eval(synth_dir, match_dir, tol, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace objguide::cli
