// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "upat/checkpoint.hpp"
#include "upat/errors.hpp"
#include "upat/evaluation.hpp"
#include "upat/raster.hpp"
#include "upat/seeding.hpp"

namespace upat {

namespace fs = std::filesystem;

namespace {

constexpr const char* kCheckpointFile = "checkpoint.upat";
constexpr const char* kMetricsFile = "metrics.jsonl";

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string csv_real(double v) { return std::isfinite(v) ? format_real(v) : std::string(); }

nlohmann::json cost_json(const PassCostReport& r) {
  return {{"method", r.method},
          {"attack_steps", r.attack_steps},
          {"generation_units_per_step", r.gen_passes_per_step},
          {"train_forward_units_per_step", r.train_forward_units},
          {"train_backward_units_per_step", r.train_backward_units},
          {"units_per_step", r.total_units_per_step},
          {"relative_cost", r.relative_cost}};
}

int attack_steps_of(const TrainConfig& t) { return t.method == Method::kPat ? t.attack.num_steps : 0; }

nlohmann::json make_summary(const ExperimentConfig& cfg, const TrainingState& st) {
  const TrainConfig& t = cfg.train;
  const auto steps = static_cast<int>(std::max<std::int64_t>(st.global_step, 1));
  return {{"schema_version", kMetricsSchemaVersion},
          {"run", run_name(cfg)},
          {"config_hash", config_hash(cfg)},
          {"method", method_name(t.method)},
          {"epochs", static_cast<int>(st.history.size())},
          {"final", to_json(st.history.back())},
          {"cost", cost_json(pass_cost_report(t.method, attack_steps_of(t)))},
          {"measured_cost", cost_json(report_from_ledger(t.method, attack_steps_of(t), st.ledger, steps))},
          {"parameter_hash", parameter_hash(*st.model)}};
}

double final_radius(const ExperimentConfig& cfg, const TrainingState& st) {
  const int last = std::max(st.next_epoch - 1, 0);
  return radius_at_epoch(cfg.train.radius_schedule(), last);
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const DatasetSplits data = ingest_dataset(cfg.dataset);
  const std::string yaml = serialize_config(cfg);
  TrainOutcome out;
  out.dir = fs::path(cfg.output_dir) / run_name(cfg);
  const fs::path ckpt = out.dir / kCheckpointFile;

  TrainingState st;
  if (fs::exists(ckpt)) {
    Checkpoint c = load_checkpoint(ckpt.string());
    if (c.config_yaml != yaml) {
      throw ConfigError("run directory " + out.dir.string() + " holds a checkpoint for a different config");
    }
    st = std::move(c.state);
    out.resumed = true;
  } else {
    st = init_training(cfg.train, architecture_json(cfg.model, cfg.dataset), data.train.images.shape());
    fs::create_directories(out.dir);
    write_text(out.dir / "config.yaml", yaml);
  }

  // Drop metric lines written after the checkpoint being resumed.
  std::string metrics;
  for (const auto& r : st.history) metrics += to_json(r).dump() + "\n";
  write_text(out.dir / kMetricsFile, metrics);

  std::ofstream stream(out.dir / kMetricsFile, std::ios::app);
  const int target = opts.stop_after >= 0 ? std::min(opts.stop_after, cfg.train.epochs) : cfg.train.epochs;
  const std::string method(method_name(cfg.train.method));
  auto on_epoch = [&](const EpochRecord& rec, const TrainingState& s) {
    stream << to_json(rec).dump() << "\n";
    stream.flush();
    const int done = rec.epoch + 1;
    if (done % cfg.checkpoint_every == 0 || done == cfg.train.epochs || done == target) {
      save_checkpoint(ckpt.string(), s, method, yaml);
    }
    if (opts.log) {
      *opts.log << "[" << run_name(cfg) << "] epoch " << rec.epoch << " val_acc " << std::fixed
                << std::setprecision(4) << rec.val_clean_acc << " loss " << rec.train_loss << " radius "
                << rec.radius * 255.0 << "/255\n"
                << std::defaultfloat;
    }
  };
  run_training(st, cfg.train, data, on_epoch, opts.stop_after);

  out.history = st.history;
  out.complete = st.next_epoch >= cfg.train.epochs;
  if (out.complete) {
    out.summary = make_summary(cfg, st);
    write_text(out.dir / "summary.json", out.summary.dump(2) + "\n");
  }
  return out;
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& cfg) {
  std::vector<AblationVariant> v;
  auto with = [&](std::string label, Method m) {
    ExperimentConfig c = cfg;
    c.train.method = m;
    v.push_back({std::move(label), std::move(c)});
    return &v.back().config;
  };
  with("baseline", Method::kBaseline);
  for (int k : cfg.ablate.pat_steps) {
    ExperimentConfig* c = with("pat-k" + std::to_string(k), Method::kPat);
    c->train.attack.num_steps = k;
    c->train.attack.spec.step_size = c->train.attack.step.resolve(c->train.attack.spec.radius, k);
  }
  with("upat", Method::kUpat);
  with("upat_flat", Method::kUpatFlat);
  with("upat_no_clean", Method::kUpatNoClean);
  for (double r : cfg.ablate.radii) {
    std::string tag = format_radius(r);
    std::replace(tag.begin(), tag.end(), '/', '_');
    ExperimentConfig* c = with("upat-r" + tag, Method::kUpat);
    c->train.universal.spec.radius = r;
    c->train.universal.spec.step_size = c->train.universal.step.resolve(r, 1);
  }
  return v;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << kAblationCsvHeader << "\n";
  for (const auto& r : rows) {
    out << r.label << "," << r.method << "," << r.attack_steps << "," << format_radius(r.radius) << "," << r.seed
        << "," << r.epochs << "," << csv_real(r.val_clean_acc) << "," << csv_real(r.val_loss) << ","
        << csv_real(r.adv_err_increase) << "," << csv_real(r.units_per_step) << "," << csv_real(r.relative_cost)
        << "\n";
  }
  return out.str();
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const AblationRow*>> groups;
  for (const auto& r : rows) {
    if (!groups.count(r.label)) order.push_back(r.label);
    groups[r.label].push_back(&r);
  }
  std::ostringstream out;
  out << std::left << std::setw(16) << "variant" << std::setw(15) << "method" << std::right << std::setw(6)
      << "seeds" << std::setw(10) << "radius" << std::setw(12) << "val acc %" << std::setw(8) << "std"
      << std::setw(12) << "adv err +" << std::setw(8) << "cost" << "\n";
  for (const auto& label : order) {
    const auto& g = groups[label];
    double mean = 0.0, adv = 0.0;
    int adv_n = 0;
    for (const auto* r : g) {
      mean += r->val_clean_acc;
      if (std::isfinite(r->adv_err_increase)) {
        adv += r->adv_err_increase;
        ++adv_n;
      }
    }
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (const auto* r : g) var += (r->val_clean_acc - mean) * (r->val_clean_acc - mean);
    const double sd = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1)) : 0.0;
    std::ostringstream radius, advs;
    radius << std::fixed << std::setprecision(1) << g.front()->radius * 255.0 << "/255";
    if (adv_n > 0) {
      advs << std::fixed << std::setprecision(2) << 100.0 * adv / adv_n;
    } else {
      advs << "-";
    }
    out << std::left << std::setw(16) << label << std::setw(15) << g.front()->method << std::right << std::setw(6)
        << g.size() << std::setw(10) << radius.str() << std::setw(12) << std::fixed << std::setprecision(2)
        << 100.0 * mean << std::setw(8) << 100.0 * sd << std::setw(12) << advs.str() << std::setw(8)
        << std::setprecision(1) << g.front()->relative_cost << "\n"
        << std::defaultfloat;
  }
  return out.str();
}

AblationOutcome cmd_ablate(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  ingest_dataset(cfg.dataset);
  AblationOutcome out;
  const std::string name = cfg.run_id.empty() ? "ablate-" + config_hash(cfg).substr(0, 12) : cfg.run_id;
  out.dir = fs::path(cfg.output_dir) / name;
  fs::create_directories(out.dir);
  write_text(out.dir / "config.yaml", serialize_config(cfg));

  for (std::uint64_t seed : cfg.ablate.seeds) {
    for (const auto& v : ablation_variants(cfg)) {
      ExperimentConfig c = v.config;
      c.train.seed = seed;
      c.output_dir = (out.dir / "runs").string();
      c.run_id = v.label + "-s" + std::to_string(seed);
      TrainOptions opts;
      opts.log = log;
      const TrainOutcome r = cmd_train(c, opts);
      const EpochRecord& last = r.history.back();
      AblationRow row;
      row.label = v.label;
      row.method = std::string(method_name(c.train.method));
      row.attack_steps = attack_steps_of(c.train);
      row.radius = c.train.base_radius();
      row.seed = seed;
      row.epochs = static_cast<int>(r.history.size());
      row.val_clean_acc = last.val_clean_acc;
      row.val_loss = last.val_loss;
      row.adv_err_increase = last.adv_err_increase;
      const PassCostReport cost = pass_cost_report(c.train.method, row.attack_steps);
      row.units_per_step = cost.total_units_per_step;
      row.relative_cost = cost.relative_cost;
      out.rows.push_back(row);
      write_text(out.dir / "results.csv", ablation_csv(out.rows));
      write_text(out.dir / "table.txt", ablation_table(out.rows));
    }
  }
  return out;
}

const std::vector<std::string>& analyze_modes() {
  static const std::vector<std::string> modes = {"strength", "landscape", "viz", "corruption", "cost"};
  return modes;
}

std::string cost_table_text(const std::vector<PassCostReport>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(15) << "method" << std::right << std::setw(6) << "steps" << std::setw(12)
      << "gen units" << std::setw(12) << "train fwd" << std::setw(12) << "train bwd" << std::setw(12)
      << "units/step" << std::setw(10) << "relative" << "\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(15) << r.method << std::right << std::setw(6) << r.attack_steps << std::fixed
        << std::setprecision(2) << std::setw(12) << r.gen_passes_per_step << std::setw(12) << r.train_forward_units
        << std::setw(12) << r.train_backward_units << std::setw(12) << r.total_units_per_step << std::setw(10)
        << r.relative_cost << "\n"
        << std::defaultfloat;
  }
  return out.str();
}

std::string cost_table_csv(const std::vector<PassCostReport>& rows) {
  std::ostringstream out;
  out << "method,attack_steps,generation_units,train_forward_units,train_backward_units,units_per_step,"
         "relative_cost\n";
  for (const auto& r : rows) {
    out << r.method << "," << r.attack_steps << "," << format_real(r.gen_passes_per_step) << ","
        << format_real(r.train_forward_units) << "," << format_real(r.train_backward_units) << ","
        << format_real(r.total_units_per_step) << "," << format_real(r.relative_cost) << "\n";
  }
  return out.str();
}

nlohmann::json cmd_analyze(const std::string& checkpoint_path, const AnalyzeOptions& opts, std::ostream& out) {
  const auto& modes = analyze_modes();
  if (std::find(modes.begin(), modes.end(), opts.mode) == modes.end()) {
    throw ConfigError("unknown analyze mode '" + opts.mode + "' (expected strength, landscape, viz, corruption or cost)");
  }
  if (opts.adversary != "auto" && opts.adversary != "universal" && opts.adversary != "samplewise") {
    throw ConfigError("--adversary must be auto, universal or samplewise");
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const ExperimentConfig cfg = parse_config(ck.config_yaml);
  const fs::path dir = opts.out_dir.empty() ? fs::path(checkpoint_path).parent_path() / "analysis" : fs::path(opts.out_dir);
  fs::create_directories(dir);
  const Classifier& model = *ck.state.model;

  nlohmann::json report = {{"schema_version", kMetricsSchemaVersion}, {"mode", opts.mode}, {"method", ck.method},
                           {"epoch", ck.state.next_epoch}};
  if (opts.mode == "cost") {
    const auto rows = cost_table(5);
    out << cost_table_text(rows);
    write_text(dir / "cost.csv", cost_table_csv(rows));
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) arr.push_back(cost_json(r));
    report["rows"] = arr;
  } else {
    const DatasetSplits data = ingest_dataset(cfg.dataset);
    const double attack_radius = opts.radius.value_or(cfg.train.attack.spec.radius);
    const double universal_radius = final_radius(cfg, ck.state);
    if (opts.mode == "strength") {
      const bool has_universal = ck.state.universal.has_value();
      if (opts.adversary == "universal" && !has_universal) {
        throw ConfigError("strength in universal mode needs a checkpoint with universal state; '" + ck.method +
                          "' checkpoints have none");
      }
      const bool run_universal = has_universal && opts.adversary != "samplewise";
      const bool run_samplewise = opts.adversary != "universal";
      auto both_splits = [&](const AdversaryMode& mode) {
        const StrengthResult tr = attack_strength(model, data.train, mode);
        const StrengthResult va = attack_strength(model, data.val, mode);
        return nlohmann::json{{"train", {{"clean_error", tr.clean_error}, {"adv_error", tr.adv_error}, {"increase", tr.increase}}},
                              {"val", {{"clean_error", va.clean_error}, {"adv_error", va.adv_error}, {"increase", va.increase}}}};
      };
      if (run_universal) {
        report["universal"] = both_splits(UniversalAdversary{&*ck.state.universal, universal_radius});
        report["universal"]["radius"] = universal_radius;
      }
      if (run_samplewise) {
        report["samplewise"] = both_splits(SamplewiseAdversary{cfg.train.attack, attack_radius, opts.seed});
        report["samplewise"]["radius"] = attack_radius;
        report["samplewise"]["steps"] = cfg.train.attack.num_steps;
      }
      out << report.dump(2) << "\n";
    } else if (opts.mode == "landscape") {
      const int grid = opts.grid.value_or(cfg.eval.landscape_grid);
      const double span = opts.span.value_or(cfg.eval.landscape_span);
      const std::size_t n = std::min<std::size_t>(data.val.size(), static_cast<std::size_t>(cfg.eval.landscape_samples));
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      const LandscapeGrid g = loss_landscape(model, data.val.subset(idx), grid, span, opts.seed);
      std::ostringstream csv;
      csv << "row,col,alpha1,alpha2,loss\n";
      bool finite = true;
      for (int i = 0; i < g.n; ++i) {
        for (int j = 0; j < g.n; ++j) {
          csv << i << "," << j << "," << format_real(g.alphas[i]) << "," << format_real(g.alphas[j]) << ","
              << format_real(g.at(i, j)) << "\n";
          finite = finite && std::isfinite(g.at(i, j));
        }
      }
      write_text(dir / "landscape.csv", csv.str());
      write_pnm((dir / "landscape.pgm").string(), landscape_heatmap(g));
      report["grid"] = g.n;
      report["span"] = g.span;
      report["samples"] = n;
      report["center_loss"] = g.at(g.n / 2, g.n / 2);
      report["finite"] = finite;
      if (!finite) out << "warning: landscape contains non-finite losses\n";
      out << "wrote " << (dir / "landscape.csv").string() << " and " << (dir / "landscape.pgm").string() << "\n";
    } else if (opts.mode == "viz") {
      PyramidImages imgs;
      if (ck.state.universal) {
        imgs = export_pyramid_images(*ck.state.universal, universal_radius);
        report["source"] = "universal";
        report["radius"] = universal_radius;
      } else {
        std::vector<std::size_t> first = {0};
        const LabeledImages one = data.val.subset(first);
        auto rng = make_rng(opts.seed, kStreamEvaluation);
        const AttackResult a = pgd_pyramid_attack(model, one.images, one.labels, cfg.train.attack, attack_radius,
                                                  nullptr, rng);
        imgs = export_pyramid_images(a.perturbations.front(), attack_radius);
        report["source"] = "samplewise";
        report["radius"] = attack_radius;
      }
      const std::string ext = imgs.composite.channels == 1 ? ".pgm" : ".ppm";
      nlohmann::json files = nlohmann::json::array();
      for (std::size_t i = 0; i < imgs.levels.size(); ++i) {
        const fs::path p = dir / (level_name(imgs.scales[i]) + ext);
        write_pnm(p.string(), imgs.levels[i]);
        files.push_back(p.filename().string());
      }
      write_pnm((dir / ("composite" + ext)).string(), imgs.composite);
      files.push_back("composite" + ext);
      report["files"] = files;
      for (const auto& f : files) out << "wrote " << (dir / f.get<std::string>()).string() << "\n";
    } else {
      std::vector<std::string> warnings;
      const CorruptionAccuracies acc =
          corruption_eval(model, data.val, cfg.eval.corruptions, opts.seed, cfg.eval.max_severity, &warnings);
      std::ostringstream csv;
      csv << "corruption,severity,accuracy\n";
      nlohmann::json j = nlohmann::json::object();
      for (const auto& name : cfg.eval.corruptions) {
        for (const auto& [sev, a] : acc.at(name)) {
          csv << name << "," << sev << "," << format_real(a) << "\n";
          j[name][std::to_string(sev)] = a;
        }
      }
      write_text(dir / "corruption.csv", csv.str());
      report["accuracy"] = j;
      report["warnings"] = warnings;
      for (const auto& w : warnings) out << "warning: " << w << "\n";
      out << csv.str();
    }
  }
  std::ofstream(dir / "reports.jsonl", std::ios::app) << report.dump() << "\n";
  return report;
}

nlohmann::json cmd_ingest(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.dataset.validate();
  const DatasetSplits s = ingest_dataset(cfg.dataset);
  auto counts = [&](const LabeledImages& d) {
    std::vector<int> c(s.num_classes, 0);
    for (int y : d.labels) ++c[y];
    return c;
  };
  auto digest = [](const LabeledImages& d) {
    const auto& px = d.images.pixels();
    std::string bytes(reinterpret_cast<const char*>(px.data()), px.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(d.labels.data()), d.labels.size() * sizeof(int));
    return sha256_hex(bytes);
  };
  const ImageShape shape = s.train.images.shape();
  nlohmann::json j = {{"dataset", cfg.dataset.name},
                      {"seed", cfg.dataset.seed},
                      {"image_shape", {shape.height, shape.width, shape.channels}},
                      {"num_classes", s.num_classes},
                      {"train", {{"size", s.train.size()}, {"class_counts", counts(s.train)}, {"sha256", digest(s.train)}}},
                      {"val", {{"size", s.val.size()}, {"class_counts", counts(s.val)}, {"sha256", digest(s.val)}}}};
  out << j.dump(2) << "\n";
  return j;
}

}  // namespace upat
