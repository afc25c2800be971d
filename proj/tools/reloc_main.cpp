// Command-line frontend: synthesize scenes, estimate relative poses, dump
// correspondences, and score submissions against ground truth.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <locale>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reloc/pipeline.hpp"
#include "reloc/report_io.hpp"
#include "reloc/scene_io.hpp"

namespace fs = std::filesystem;
using namespace reloc;

namespace {

struct EstimateFlags {
  std::vector<std::string> scene_dirs;
  std::string out;
  std::string diagnostics;
  std::string ransac_log;
  std::string dump_matches;
  std::string pointmap_dir, depth_dir, mask_dir;
  std::string cheirality = "triangulation";
  PipelineOptions opts;
};

void apply_overrides(SceneRecord& scene, const EstimateFlags& flags) {
  const auto patch = [](FrameFiles& f, const EstimateFlags& fl) {
    if (!fl.pointmap_dir.empty()) f.points = fs::path(fl.pointmap_dir) / (f.id + "_points.fmap");
    if (!fl.depth_dir.empty()) f.depth = fs::path(fl.depth_dir) / (f.id + "_depth.fmap");
    if (!fl.mask_dir.empty()) f.mask = fs::path(fl.mask_dir) / (f.id + ".pgm");
  };
  patch(scene.reference, flags);
  for (auto& q : scene.queries) patch(q, flags);
}

int run_estimate(const EstimateFlags& flags) {
  std::string submission = "# scene frame qw qx qy qz tx ty tz confidence\n";
  std::string diagnostics =
      "scene,frame,status,pairs,essential_inliers,ransac_iterations,cheirality_support,"
      "scale_inliers,depth_skipped,confidence\n";
  std::string ransac_csv = "scene,frame,iter,inliers,mean_sampson\n";

  for (const auto& dir : flags.scene_dirs) {
    SceneRecord scene = read_scene(dir);
    apply_overrides(scene, flags);
    const SceneEstimate est = estimate_scene(scene, flags.opts);
    submission += submission_text(est);
    for (const auto& f : est.frames) {
      diagnostics += est.scene_id + "," + f.frame + "," + to_string(f.status) + "," +
                     std::to_string(f.pairs) + "," + std::to_string(f.essential_inliers) + "," +
                     std::to_string(f.ransac_iterations) + "," +
                     std::to_string(f.cheirality_support) + "," +
                     std::to_string(f.scale_inliers) + "," + std::to_string(f.depth_skipped) +
                     "," + io::fmt(f.confidence) + "\n";
      for (const auto& rec : f.ransac_log) {
        ransac_csv += est.scene_id + "," + f.frame + "," + std::to_string(rec.iteration) + "," +
                      std::to_string(rec.inliers) + "," + io::fmt(rec.mean_sampson) + "\n";
      }
      if (f.status != FrameStatus::ok) {
        std::fprintf(stderr, "%s %s: %s (%s)\n", est.scene_id.c_str(), f.frame.c_str(),
                     to_string(f.status), f.detail.c_str());
      }
    }
    if (!flags.dump_matches.empty()) {
      fs::create_directories(flags.dump_matches);
      PointMap pm1 = read_pointmap(scene.reference.points);
      InstanceMask mask1 = fs::exists(scene.reference.mask)
                               ? read_mask(scene.reference.mask)
                               : InstanceMask::background(pm1.width, pm1.height);
      for (const auto& q : scene.queries) {
        PointMap pm2 = read_pointmap(q.points);
        InstanceMask mask2 = fs::exists(q.mask) ? read_mask(q.mask)
                                                : InstanceMask::background(pm2.width, pm2.height);
        CorrespondenceMap map = match_global(pm1, pm2, flags.opts.match);
        if (flags.opts.use_instances) {
          std::vector<CorrespondenceMap> per_instance;
          for (const std::uint8_t o : shared_instance_ids(mask1, mask2))
            per_instance.push_back(match_instance(pm1, pm2, mask1, mask2, o, flags.opts.match));
          map = merge_maps(map, per_instance, mask1);
        }
        std::string txt;
        for (const auto& c : map.pairs) {
          txt += std::to_string(c.ref.x) + " " + std::to_string(c.ref.y) + " " +
                 std::to_string(c.query.x) + " " + std::to_string(c.query.y) + " " +
                 (c.instance ? "instance(" + std::to_string(c.instance) + ")" : "global") + "\n";
        }
        io::write_file(fs::path(flags.dump_matches) / (est.scene_id + "_" + q.id + ".txt"), txt);
      }
    }
  }

  if (flags.out.empty()) {
    std::fputs(submission.c_str(), stdout);
  } else {
    io::write_file(flags.out, submission);
  }
  if (!flags.diagnostics.empty()) io::write_file(flags.diagnostics, diagnostics);
  if (!flags.ransac_log.empty()) io::write_file(flags.ransac_log, ransac_csv);
  return 0;
}

std::vector<GroundTruthFrame> load_ground_truth(const std::string& root) {
  std::vector<GroundTruthFrame> gts;
  std::vector<fs::path> dirs;
  if (fs::exists(fs::path(root) / "intrinsics.txt")) {
    dirs.push_back(root);
  } else {
    dirs = list_scene_dirs(root);
  }
  require(!dirs.empty(), ErrorCode::io_error, root + " contains no scenes");
  for (const auto& d : dirs) {
    const auto scene_gts = ground_truth_frames(read_scene(d));
    gts.insert(gts.end(), scene_gts.begin(), scene_gts.end());
  }
  return gts;
}

int run_eval(const std::string& submission_path, const std::string& gt_root,
             const std::string& report_path, const std::string& json_path,
             const std::string& csv_path) {
  const auto gts = load_ground_truth(gt_root);
  std::vector<FramePrediction> preds;
  for (const auto& e : read_submission(submission_path)) {
    preds.push_back({e.scene, e.frame, e.pose, e.confidence, true});
  }
  const auto records = evaluate_frames(preds, gts);
  const EvalReport report = aggregate(records);
  const std::string text = report_text(report);
  std::fputs(text.c_str(), stdout);
  if (!report_path.empty()) io::write_file(report_path, text);
  if (!json_path.empty()) io::write_file(json_path, report_json(report));
  if (!csv_path.empty()) io::write_file(csv_path, records_csv(records));
  return 0;
}

const char* kFormatsText = R"fmt(FMAP float raster
  magic "FMAP" | version u8 (=1) | dtype u8 (0 = f32) | channels u8
  (1 = depth, 3 = point map) | flags u8 (bit0 = canonical-space depth) |
  width u32 LE | height u32 LE | focal_used f32 LE |
  payload: width*height*channels little-endian f32, row-major, channels
  interleaved per pixel | validity bitmap: 1 bit per pixel, row-major,
  LSB-first within each byte, zero-padded to a whole byte.
  Total size = 20 + w*h*c*4 + ceil(w*h/8) bytes.
  Point maps carry per-pixel 3D coordinates with both views of a pair
  expressed in the reference camera frame. Depth maps carry one value per
  pixel; canonical-space depth declares the canonical focal in focal_used
  and is restored to metric via d = (f / focal_used) * d_c.

Instance masks
  Binary PGM (P5), maxval 255. Label 0 is background; labels >= 1 identify
  the same instance in the reference and query masks of a pair.

Scene layout
  <scene>/intrinsics.txt  lines: frame fx fy cx cy w h
                          the first line names the reference frame
  <scene>/poses.txt       optional ground truth, lines:
                          frame qw qx qy qz tx ty tz  (world -> camera)
  <scene>/frames/<frame>_points.fmap and <frame>_depth.fmap
  <scene>/masks/<frame>.pgm

Submission
  One line per estimated frame:
    scene frame qw qx qy qz tx ty tz confidence
  '#' starts a comment. Frames without an estimate appear as
    # no-estimate <scene> <frame> <status>
  The pose is the relative pose of the query w.r.t. the reference
  (p_query = R * p_ref + t); quaternions are w-first and unit norm.

Correspondence dump
  One line per pair: i j k l tag, where (i, j) is the reference pixel
  (column, row), (k, l) the query pixel, and tag is "global" or
  "instance(o)".
)fmt";

}  // namespace

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  CLI::App app{"Map-free visual relocalization toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene with ground truth");
  std::string synth_out, synth_name = "scene_0000";
  int synth_queries = 2;
  SceneConfig scfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--name", synth_name, "scene directory name");
  synth->add_option("--queries", synth_queries, "query frames per scene");
  synth->add_option("--seed", scfg.seed, "generator seed");
  synth->add_option("--width", scfg.width);
  synth->add_option("--height", scfg.height);
  synth->add_option("--focal", scfg.focal);
  synth->add_option("--instances", scfg.n_instances);
  synth->add_option("--points-per-instance", scfg.points_per_instance);
  synth->add_option("--background-points", scfg.background_points);
  synth->add_option("--depth-min", scfg.depth_min);
  synth->add_option("--depth-max", scfg.depth_max);
  synth->add_option("--baseline-min", scfg.baseline_min);
  synth->add_option("--baseline-max", scfg.baseline_max);
  synth->add_option("--rotation-range", scfg.rotation_range_deg, "max rotation, degrees");
  synth->add_option("--point-sigma", scfg.noise.point_sigma, "3D noise, meters");
  synth->add_option("--depth-sigma-rel", scfg.noise.depth_sigma_rel);
  synth->add_option("--outlier-fraction", scfg.noise.outlier_fraction);
  synth->add_option("--mask-erosion", scfg.noise.mask_erosion);

  // ---- estimate ----
  auto* estimate = app.add_subcommand("estimate", "estimate relative poses for scene(s)");
  EstimateFlags ef;
  bool no_instance = false, no_depth_scale = false;
  estimate->add_option("scenes", ef.scene_dirs, "scene directories")->required();
  estimate->add_option("--out", ef.out, "submission file (stdout when omitted)");
  estimate->add_option("--seed", ef.opts.seed, "RNG seed");
  estimate->add_flag("--no-instance", no_instance, "skip instance-constrained matching");
  estimate->add_flag("--no-depth-scale", no_depth_scale, "emit unit-norm translations");
  estimate->add_option("--cheirality", ef.cheirality, "triangulation|depth");
  estimate->add_option("--min-confidence", ef.opts.match.min_confidence);
  estimate->add_option("--stride", ef.opts.match.stride, "match on a pixel stride");
  estimate->add_option("--ransac-iterations", ef.opts.ransac.max_iterations);
  estimate->add_option("--ransac-threshold", ef.opts.ransac.inlier_threshold);
  estimate->add_option("--ransac-confidence", ef.opts.ransac.confidence);
  estimate->add_option("--scale-rel-tol", ef.opts.scale_vote.rel_tol);
  estimate->add_option("--jobs", ef.opts.jobs, "parallel frames per scene");
  estimate->add_option("--diagnostics", ef.diagnostics, "per-frame status CSV");
  estimate->add_option("--ransac-log", ef.ransac_log, "per-iteration model score CSV");
  estimate->add_option("--dump-matches", ef.dump_matches, "directory for correspondence dumps");
  estimate->add_option("--pointmap-dir", ef.pointmap_dir, "override point-map directory");
  estimate->add_option("--depth-dir", ef.depth_dir, "override depth directory");
  estimate->add_option("--mask-dir", ef.mask_dir, "override mask directory");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score a submission against ground truth");
  std::string eval_submission, eval_gt, eval_report, eval_json, eval_csv;
  eval_cmd->add_option("--submission", eval_submission)->required();
  eval_cmd->add_option("--gt", eval_gt, "scene tree (or single scene) with poses.txt")
      ->required();
  eval_cmd->add_option("--report", eval_report, "write the text report here");
  eval_cmd->add_option("--json", eval_json, "write the JSON report here");
  eval_cmd->add_option("--csv", eval_csv, "write the per-frame CSV here");

  // ---- match ----
  auto* match_cmd = app.add_subcommand("match", "dump correspondences for scene(s)");
  EstimateFlags mf;
  bool match_no_instance = false;
  std::string match_out;
  match_cmd->add_option("scenes", mf.scene_dirs, "scene directories")->required();
  match_cmd->add_option("--out", match_out, "output directory")->required();
  match_cmd->add_flag("--no-instance", match_no_instance);
  match_cmd->add_option("--min-confidence", mf.opts.match.min_confidence);
  match_cmd->add_option("--stride", mf.opts.match.stride);

  // ---- formats ----
  auto* formats = app.add_subcommand("formats", "print the on-disk format specifications");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const SyntheticScene scene = generate_scene(scfg, synth_queries);
      const fs::path dir = write_scene(fs::path(synth_out) / synth_name, scene);
      std::printf("scene: %s\n", dir.string().c_str());
      for (std::size_t i = 0; i < scene.queries.size(); ++i) {
        const auto& q = scene.queries[i];
        const auto quat = q.gt_pose.rotation.to_quaternion();
        std::printf("%s gt: q = (%s %s %s %s), t = (%s %s %s), |t| = %s, pairs = %zu\n",
                    query_frame_id(i).c_str(), io::fmt(quat[0]).c_str(),
                    io::fmt(quat[1]).c_str(), io::fmt(quat[2]).c_str(),
                    io::fmt(quat[3]).c_str(), io::fmt(q.gt_pose.translation.x()).c_str(),
                    io::fmt(q.gt_pose.translation.y()).c_str(),
                    io::fmt(q.gt_pose.translation.z()).c_str(),
                    io::fmt(q.gt_pose.translation.norm()).c_str(), q.gt_pairs.size());
      }
      return 0;
    }
    if (*estimate) {
      ef.opts.use_instances = !no_instance;
      ef.opts.use_depth_scale = !no_depth_scale;
      ef.opts.collect_ransac_log = !ef.ransac_log.empty();
      if (ef.cheirality == "depth") {
        ef.opts.cheirality = CheiralityMethod::depth;
      } else {
        require(ef.cheirality == "triangulation", ErrorCode::invalid_input,
                "--cheirality must be triangulation or depth");
      }
      return run_estimate(ef);
    }
    if (*eval_cmd) {
      return run_eval(eval_submission, eval_gt, eval_report, eval_json, eval_csv);
    }
    if (*match_cmd) {
      mf.opts.use_instances = !match_no_instance;
      mf.dump_matches = match_out;
      // reuse the estimate path's dump logic without estimating
      for (const auto& dir : mf.scene_dirs) {
        SceneRecord scene = read_scene(dir);
        PointMap pm1 = read_pointmap(scene.reference.points);
        InstanceMask mask1 = fs::exists(scene.reference.mask)
                                 ? read_mask(scene.reference.mask)
                                 : InstanceMask::background(pm1.width, pm1.height);
        fs::create_directories(match_out);
        for (const auto& q : scene.queries) {
          PointMap pm2 = read_pointmap(q.points);
          InstanceMask mask2 = fs::exists(q.mask)
                                   ? read_mask(q.mask)
                                   : InstanceMask::background(pm2.width, pm2.height);
          CorrespondenceMap map = match_global(pm1, pm2, mf.opts.match);
          if (mf.opts.use_instances) {
            std::vector<CorrespondenceMap> per_instance;
            for (const std::uint8_t o : shared_instance_ids(mask1, mask2))
              per_instance.push_back(match_instance(pm1, pm2, mask1, mask2, o, mf.opts.match));
            map = merge_maps(map, per_instance, mask1);
          }
          std::string txt;
          for (const auto& c : map.pairs) {
            txt += std::to_string(c.ref.x) + " " + std::to_string(c.ref.y) + " " +
                   std::to_string(c.query.x) + " " + std::to_string(c.query.y) + " " +
                   (c.instance ? "instance(" + std::to_string(c.instance) + ")" : "global") +
                   "\n";
          }
          io::write_file(fs::path(match_out) / (scene.scene_id + "_" + q.id + ".txt"), txt);
        }
      }
      return 0;
    }
    if (*formats) {
      std::fputs(kFormatsText, stdout);
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
