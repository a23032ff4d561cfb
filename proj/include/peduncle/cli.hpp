#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "peduncle/detectors.hpp"
#include "peduncle/eval.hpp"
#include "peduncle/scenegen.hpp"

namespace peduncle::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNotDetected = 3 };

struct Options {
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  std::string detector = "cnn";
  std::optional<double> threshold;
  std::string scenes;
  std::string models;
  std::string features;
  std::string input;
  std::string mode = "both";
  std::string pepper_color;
  std::string net;
  std::size_t count = 1;
  bool cloud = false;
};

inline Settings load_config(const Options& o) {
  Settings s = o.config.empty() ? Settings{} : load_settings(o.config);
  if (o.threshold) {
    s.score_threshold = *o.threshold;
    validate(s);
  }
  return s;
}

/// Output directory with the effective configuration echoed into it.
inline fs::path prepare_out(const Options& o, const Settings& s) {
  const fs::path out(o.out);
  fs::create_directories(out);
  text::write_file((out / "config.cfg").string(), format_settings(s));
  return out;
}

struct SceneSet {
  fs::path dir;
  std::vector<ManifestEntry> entries;
};

inline SceneSet load_manifest(const std::string& path) {
  SceneSet set{fs::path(path).parent_path(), parse_manifest(text::read_file(path))};
  if (set.entries.empty()) throw Error(ErrorCode::ParseError, "manifest lists no scenes");
  return set;
}

inline std::vector<LabeledScene> load_all(const SceneSet& set, const Settings& s) {
  std::vector<LabeledScene> out;
  for (const auto& e : set.entries) {
    out.push_back(load_scene(set.dir, e, s));
    out.back().drop_cloud();
  }
  return out;
}

inline void progress(const std::string& msg) { std::cerr << msg << "\n"; }

// ---------------------------------------------------------------------------
// Commands

inline int cmd_gen_scene(const Options& o) {
  const Settings s = load_config(o);
  const fs::path out = prepare_out(o, s);
  auto entries = benchmark_entries(o.count, o.seed);
  for (const auto& e : entries) {
    SceneParams p = sample_scene_params(e.seed, s);
    if (!o.pepper_color.empty()) p.color = parse_pepper_color(o.pepper_color);
    const auto scene = generate(p);
    save_scene(out, e.id, scene);
    if (o.cloud) save_point_cloud((out / (e.id + "_cloud.pcloud")).string(), scene.cloud);
    progress("generated " + e.id);
  }
  text::write_file((out / "manifest.txt").string(), format_manifest(entries));
  return kOk;
}

inline int cmd_extract_features(const Options& o) {
  const Settings s = load_config(o);
  const auto scenes = load_all(load_manifest(o.scenes), s);
  const fs::path out = prepare_out(o, s);
  const auto rows = extract_training_features(scenes, s, o.seed);
  text::write_file((out / "features.txt").string(), format_features(rows));
  progress("wrote " + std::to_string(rows.size()) + " descriptors");
  return kOk;
}

inline int cmd_train_nb(const Options& o) {
  const Settings s = load_config(o);
  const auto scenes = load_all(load_manifest(o.scenes), s);
  const fs::path out = prepare_out(o, s);
  text::write_file((out / "nb.model").string(), format_naive_bayes(train_naive_bayes(scenes, s.nb_samples_per_class, o.seed)));
  return kOk;
}

inline int cmd_train_svm(const Options& o) {
  const Settings s = load_config(o);
  std::vector<LabeledFeature> rows;
  if (!o.features.empty()) {
    rows = parse_features(text::read_file(o.features));
  } else {
    const auto scenes = load_all(load_manifest(o.scenes), s);
    rows = extract_training_features(scenes, s, o.seed);
  }
  const fs::path out = prepare_out(o, s);
  const auto model = train_svm(rows, s, o.seed);
  text::write_file((out / "svm.model").string(), format_svm(model));
  progress("trained SVM with " + std::to_string(model.support_vectors.size()) + " support vectors");
  return kOk;
}

inline int cmd_train_cnn(const Options& o) {
  const Settings s = load_config(o);
  const auto spec = o.net.empty() ? cnn::default_network_spec() : cnn::parse_network_spec(text::read_file(o.net));
  const auto scenes = load_all(load_manifest(o.scenes), s);
  const fs::path out = prepare_out(o, s);
  CnnTrainReport report;
  const auto model = train_cnn(scenes, spec, s, o.seed, &report);
  text::write_file((out / "cnn.net").string(), cnn::format_network_spec(model.spec));
  text::write_file((out / "cnn.weights").string(), cnn::serialize_weights(model.spec, model.weights));
  std::string losses = "epoch,loss\n";
  for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
    losses += std::to_string(e + 1) + "," + text::format_double(report.epoch_loss[e]) + "\n";
  text::write_file((out / "cnn_training.csv").string(), losses);
  return kOk;
}

inline int cmd_score(const Options& o) {
  const Settings s = load_config(o);
  const auto kind = parse_detector(o.detector);
  const auto set = load_manifest(o.scenes);
  const Models models = load_models(o.models);
  const fs::path out = prepare_out(o, s);
  int code = kOk;
  for (const auto& e : set.entries) {
    const auto scene = load_scene(set.dir, e, s);
    std::string csv = "x,y,score\n";
    try {
      const auto a = analyze_frame(scene.rgb, scene.depth, models, kind, s);
      for (std::size_t i = 0; i < a.scores.score.size(); ++i)
        if (a.scores.scored[i])
          csv += std::to_string(i % a.scores.width) + "," + std::to_string(i / a.scores.width) + "," +
                 text::format_double(a.scores.score[i]) + "\n";
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NoPepperFound) throw;
      progress(e.id + ": " + err.what());
      code = kNotDetected;
    }
    text::write_file((out / (e.id + "_scores.csv")).string(), csv);
  }
  return code;
}

inline int cmd_filter(const Options& o) {
  const Settings s = load_config(o);
  const auto kind = parse_detector(o.detector);
  const auto set = load_manifest(o.scenes);
  const Models models = load_models(o.models);
  const fs::path out = prepare_out(o, s);
  const auto bp = box_params(s);
  int code = kOk;
  std::string report;
  for (const auto& e : set.entries) {
    const auto scene = load_scene(set.dir, e, s);
    std::string status = "ok";
    try {
      const auto a = analyze_frame(scene.rgb, scene.depth, models, kind, s);
      const auto res = filter_frame(a.scores, scene.rgb, scene.depth, s.intrinsics, a.pepper.box, models.nb,
                                    filter_params(s), bp);
      text::write_file((out / (e.id + "_diagnostics.csv")).string(), format_diagnostics(res.outcome.diagnostics));
      if (!res.outcome.cluster) throw Error(ErrorCode::NoPeduncleFound, "no peduncle cluster survives filtering");
      const auto& cluster = res.outcome.cluster->indices;
      save_point_cloud((out / (e.id + "_peduncle.pcloud")).string(), res.projected.cloud.select(cluster));
      const auto pose = cutting_pose(res.projected.cloud, cluster, bp.up);
      std::string pose_txt = "position";
      for (int k = 0; k < 3; ++k) pose_txt += " " + text::format_double(pose.position[k]);
      pose_txt += "\napproach";
      for (int k = 0; k < 3; ++k) pose_txt += " " + text::format_double(pose.approach_axis[k]);
      text::write_file((out / (e.id + "_pose.txt")).string(), pose_txt + "\n");
    } catch (const Error& err) {
      if (err.code() != ErrorCode::NoPepperFound && err.code() != ErrorCode::NoPeduncleFound) throw;
      status = std::string(to_string(err.code()));
      progress(e.id + ": " + err.what());
      code = kNotDetected;
    }
    report += e.id + " " + status + "\n";
  }
  text::write_file((out / "report.txt").string(), report);
  return code;
}

/// Candidates of every manifest scene, loaded one at a time.
inline std::vector<SceneCandidates> collect_candidates(const SceneSet& set, const Models& models, DetectorKind kind,
                                                       const Settings& s) {
  std::vector<SceneCandidates> out;
  for (const auto& e : set.entries) {
    const auto scene = load_scene(set.dir, e, s);
    out.push_back(prepare_scene(scene, models, kind, s, e.id));
    if (out.back().error) progress(e.id + ": " + std::string(to_string(*out.back().error)));
  }
  return out;
}

inline int cmd_eval(const Options& o) {
  const Settings s = load_config(o);
  const auto kind = parse_detector(o.detector);
  if (o.mode != "raw" && o.mode != "filtered" && o.mode != "both")
    throw Error(ErrorCode::InvalidInput, "mode must be raw, filtered or both");
  const auto set = load_manifest(o.scenes);
  const Models models = load_models(o.models);
  const fs::path out = prepare_out(o, s);
  const auto candidates = collect_candidates(set, models, kind, s);
  const auto thresholds = threshold_grid(s.eval_thresholds);
  std::vector<PrCurve> curves;
  if (o.mode != "filtered") curves.push_back(eval_raw(candidates, thresholds));
  if (o.mode != "raw")
    curves.push_back(eval_filtered(candidates, models.nb, thresholds, filter_params(s), box_params(s)).curve);
  text::write_file((out / "pr.csv").string(), format_pr_csv(curves));
  for (const auto& c : curves)
    text::write_file((out / ("summary_" + std::string(to_string(c.mode)) + ".txt")).string(), format_summary(c));
  std::string errors;
  for (const auto& c : candidates)
    if (c.error) errors += c.id + " " + std::string(to_string(*c.error)) + "\n";
  text::write_file((out / "scene_errors.txt").string(), errors);
  return kOk;
}

/// Input lines `score,label` with label 1 (positive), 0 (negative) or -1 (ignored).
inline int cmd_pr_curve(const Options& o) {
  const Settings s = load_config(o);
  std::vector<double> scores;
  std::vector<EvalLabel> labels;
  const std::string csv = text::read_file(o.input);
  for (auto line : text::lines(csv)) {
    if (line.empty() || line.starts_with("score")) continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos) throw Error(ErrorCode::ParseError, "expected score,label");
    scores.push_back(text::parse_double(line.substr(0, comma)));
    const int l = text::parse_int<int>(line.substr(comma + 1));
    if (l != 1 && l != 0 && l != -1) throw Error(ErrorCode::ParseError, "label must be 1, 0 or -1");
    labels.push_back(l == 1 ? EvalLabel::Positive : l == 0 ? EvalLabel::Negative : EvalLabel::Ignored);
  }
  const fs::path out = prepare_out(o, s);
  const std::vector<PrCurve> curves{pr_curve(scores, labels, threshold_grid(s.eval_thresholds))};
  text::write_file((out / "pr.csv").string(), format_pr_csv(curves));
  text::write_file((out / "summary_raw.txt").string(), format_summary(curves[0]));
  return kOk;
}

inline int cmd_throughput(const Options& o) {
  const Settings s = load_config(o);
  const auto kind = parse_detector(o.detector);
  const auto scenes = load_all(load_manifest(o.scenes), s);
  const Models models = load_models(o.models);
  const fs::path out = prepare_out(o, s);
  const double rate = detector_throughput(scenes, models, kind, s, s.throughput_runs);
  text::write_file((out / "throughput.txt").string(), "detector " + std::string(to_string(kind)) +
                                                          "\npoints_per_second " + text::format_double(rate) +
                                                          "\nruns " + std::to_string(s.throughput_runs) + "\n");
  progress(std::string(to_string(kind)) + ": " + text::format_double(rate) + " points/s");
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(std::vector<std::string> args) {
  CLI::App app{"Peduncle detection toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* c) { c->add_option("--config", o.config, "key = value settings file")->check(CLI::ExistingFile); };
  auto seeded = [&](CLI::App* c) { c->add_option("--seed", o.seed, "random seed"); };
  auto out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory")->required(); };
  auto scenes = [&](CLI::App* c) { c->add_option("--scenes", o.scenes, "scene manifest")->required()->check(CLI::ExistingFile); };
  auto models = [&](CLI::App* c) { c->add_option("--models", o.models, "model directory")->required()->check(CLI::ExistingDirectory); };
  auto detector = [&](CLI::App* c) {
    c->add_option("--detector", o.detector, "pfh-svm or cnn")->check(CLI::IsMember({"pfh-svm", "cnn"}));
  };
  auto threshold = [&](CLI::App* c) { c->add_option("--threshold", o.threshold, "score threshold")->check(CLI::Range(0.0, 1.0)); };

  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> commands;
  auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    CLI::App* c = app.add_subcommand(name, help);
    common(c);
    commands.emplace_back(c, fn);
    return c;
  };

  auto* gen = add("gen-scene", "generate labeled synthetic scenes and a manifest", cmd_gen_scene);
  seeded(gen);
  out(gen);
  gen->add_option("--count", o.count, "number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--pepper-color", o.pepper_color, "override pepper colour")->check(CLI::IsMember({"red", "green", "mixed"}));
  gen->add_flag("--cloud", o.cloud, "also write the labeled point cloud");

  auto* ef = add("extract-features", "write labeled 36-D descriptors", cmd_extract_features);
  seeded(ef);
  out(ef);
  scenes(ef);

  auto* nb = add("train-nb", "fit the HSV pepper colour model", cmd_train_nb);
  seeded(nb);
  out(nb);
  scenes(nb);

  auto* svm = add("train-svm", "train the descriptor SVM", cmd_train_svm);
  seeded(svm);
  out(svm);
  auto* svm_scenes = svm->add_option("--scenes", o.scenes, "scene manifest")->check(CLI::ExistingFile);
  auto* svm_feats = svm->add_option("--features", o.features, "features file")->check(CLI::ExistingFile);
  svm_scenes->excludes(svm_feats);
  svm->callback([&] {
    if (o.scenes.empty() && o.features.empty()) throw CLI::RequiredError("--scenes or --features");
  });

  auto* tc = add("train-cnn", "train the inception-style patch scorer", cmd_train_cnn);
  seeded(tc);
  out(tc);
  scenes(tc);
  tc->add_option("--net", o.net, "network spec file")->check(CLI::ExistingFile);

  auto* sc = add("score", "write per-pixel detector scores", cmd_score);
  out(sc);
  scenes(sc);
  models(sc);
  detector(sc);

  auto* fl = add("filter", "run the full detection and filtering pipeline", cmd_filter);
  out(fl);
  scenes(fl);
  models(fl);
  detector(fl);
  threshold(fl);

  auto* ev = add("eval", "precision-recall of raw and filtered detections", cmd_eval);
  out(ev);
  scenes(ev);
  models(ev);
  detector(ev);
  ev->add_option("--mode", o.mode, "raw, filtered or both")->check(CLI::IsMember({"raw", "filtered", "both"}));

  auto* pr = add("pr-curve", "precision-recall curve of a score,label CSV", cmd_pr_curve);
  out(pr);
  pr->add_option("--input", o.input, "CSV of score,label")->required()->check(CLI::ExistingFile);

  auto* tp = add("throughput", "points scored per second", cmd_throughput);
  out(tp);
  scenes(tp);
  models(tp);
  detector(tp);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  try {
    for (const auto& [cmd, fn] : commands)
      if (cmd->parsed()) return fn(o);
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    return e.code() == ErrorCode::NoPepperFound || e.code() == ErrorCode::NoPeduncleFound ? kNotDetected
                                                                                          : kDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

inline int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace peduncle::cli
