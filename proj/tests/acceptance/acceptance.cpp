// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. `upat_acceptance` runs all of them; `upat_acceptance N`
// runs criterion N only. One PASS/FAIL line is printed per criterion and the
// exit status is non-zero if any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "upat/adversary.hpp"
#include "upat/config.hpp"
#include "upat/cost.hpp"
#include "upat/evaluation.hpp"
#include "upat/mlp.hpp"
#include "upat/run.hpp"
#include "upat/seeding.hpp"
#include "upat/tiny_vit.hpp"
#include "upat/training.hpp"

namespace fs = std::filesystem;
using namespace upat;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures; the first few are kept for the report line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { extra_ += (extra_.empty() ? "" : ", ") + s; }
  Outcome done() const {
    std::ostringstream d;
    d << checks_ - failures_ << "/" << checks_ << " checks";
    if (!extra_.empty()) d << ", " << extra_;
    if (failures_ > 0) d << "; failed: " << notes_;
    return {failures_ == 0, d.str()};
  }

 private:
  int checks_ = 0;
  int failures_ = 0;
  std::string notes_;
  std::string extra_;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

ExperimentConfig desk_config() { return load_config(std::string(UPAT_SOURCE_DIR) + "/configs/desk.yaml"); }

LabeledImages random_data(std::uint64_t seed, std::size_t n, ImageShape shape, int k, double lo = 0.25,
                          double hi = 0.75) {
  std::mt19937_64 rng(seed);
  return {testing::random_batch(rng, n, shape, lo, hi), testing::random_labels(rng, n, k)};
}

// ---------------------------------------------------------------------------
// 1. Cost-model exactness, read from the ledger of real steps.

Outcome cost_model() {
  Checker c;
  const auto data = random_data(1, 8, {8, 8, 3}, 4);
  auto run_one = [&](Method m, int k) {
    TinyViT model(testing::tiny_vit_config(), 1);
    AdamW opt(OptimizerConfig{}, model.parameters().size());
    CostLedger ledger;
    std::mt19937_64 rng(0);
    const std::span<const int> y(data.labels);
    PyramidSpec spec{.scales = {4, 2, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 8.0 / 255, .step_size = 8.0 / 2550,
                     .per_channel = true};
    if (m == Method::kBaseline) {
      train_step_baseline(model, data.images, y, opt, 1e-3, ledger);
    } else if (m == Method::kPat) {
      AttackConfig a;
      a.spec = spec;
      a.num_steps = k;
      a.spec.step_size = a.spec.radius / k;
      train_step_pat(model, data.images, y, opt, 1e-3, a, 1.0, a.spec.radius, ledger, rng);
    } else {
      auto u = init_zeros(spec, data.images.shape());
      RadiusSchedule sched;
      sched.r_start = spec.radius;
      train_step_upat(model, data.images, y, u, opt, 1e-3, 1.0, m != Method::kUpatNoClean, sched, 0,
                      spec.radius / 10, ledger);
    }
    return report_from_ledger(m, k, ledger, 1);
  };

  const auto base = run_one(Method::kBaseline, 0);
  c.expect(base.total_units_per_step == 1.0, "baseline units " + fmt(base.total_units_per_step));
  c.expect(base == pass_cost_report(Method::kBaseline), "baseline ledger vs analytic");
  for (int k = 1; k <= 5; ++k) {
    const auto r = run_one(Method::kPat, k);
    c.expect(r.total_units_per_step == static_cast<double>(k + 2), "pat k=" + std::to_string(k));
    c.expect(r == pass_cost_report(Method::kPat, k), "pat ledger vs analytic k=" + std::to_string(k));
  }
  const auto up = run_one(Method::kUpat, 0);
  c.expect(up.total_units_per_step == 2.0, "upat units " + fmt(up.total_units_per_step));
  c.expect(up == pass_cost_report(Method::kUpat), "upat ledger vs analytic");

  const double vs5 = cost_savings(up, run_one(Method::kPat, 5));
  const double vs1 = cost_savings(up, run_one(Method::kPat, 1));
  c.expect(vs5 == 5.0 / 7.0, "savings vs 5-step " + fmt(vs5, 17));
  c.expect(vs1 == 1.0 / 3.0, "savings vs 1-step " + fmt(vs1, 17));
  c.note("savings " + fmt(100 * vs5, 3) + "% vs PAT-5, " + fmt(100 * vs1, 3) + "% vs PAT-1");
  return c.done();
}

// ---------------------------------------------------------------------------
// 2. Wall-clock ordering on the desk model.

Outcome wall_clock() {
  Checker c;
  const ExperimentConfig cfg = desk_config();
  const auto arch = architecture_json(cfg.model, cfg.dataset);
  const ImageShape shape{cfg.dataset.image_size, cfg.dataset.image_size, cfg.dataset.channels};
  const int batch = cfg.train.batch_size;
  const int steps = 20;
  std::vector<LabeledImages> batches;
  for (int i = 0; i < steps + 2; ++i) batches.push_back(random_data(100 + i, batch, shape, 10, 0.0, 1.0));

  using clock = std::chrono::steady_clock;
  auto time_method = [&](Method m, int k) {
    auto model = make_classifier(arch, 0);
    AdamW opt(cfg.train.optimizer, model->parameters().size());
    CostLedger ledger;
    std::mt19937_64 rng(0);
    AttackConfig attack = cfg.train.attack;
    attack.num_steps = std::max(k, 1);
    attack.spec.step_size = attack.spec.radius / attack.num_steps;
    auto u = init_zeros(cfg.train.universal_spec(), shape);
    const RadiusSchedule sched = cfg.train.radius_schedule();
    double total = 0.0;
    for (int i = 0; i < steps + 2; ++i) {
      const auto& b = batches[i];
      const auto t0 = clock::now();
      if (m == Method::kPat) {
        train_step_pat(*model, b.images, b.labels, opt, 1e-3, attack, 1.0, attack.spec.radius, ledger, rng);
      } else {
        train_step_upat(*model, b.images, b.labels, u, opt, 1e-3, 1.0, true, sched, 0,
                        cfg.train.universal.spec.step_size, ledger);
      }
      const double dt = std::chrono::duration<double>(clock::now() - t0).count();
      if (i >= 2) total += dt;  // first two steps are warm-up
    }
    return total / steps;
  };
  const double t_upat = time_method(Method::kUpat, 0);
  const double t_pat1 = time_method(Method::kPat, 1);
  const double t_pat5 = time_method(Method::kPat, 5);
  c.expect(t_upat < t_pat1, "t(UPAT) < t(PAT,1)");
  c.expect(t_pat1 < t_pat5, "t(PAT,1) < t(PAT,5)");
  c.note("ms/step UPAT " + fmt(1e3 * t_upat) + ", PAT-1 " + fmt(1e3 * t_pat1) + ", PAT-5 " + fmt(1e3 * t_pat5) +
         " (batch " + std::to_string(batch) + ", " + std::to_string(steps) + " steps)");
  return c.done();
}

// ---------------------------------------------------------------------------
// 3. Pyramid composition against the per-pixel loop.

Outcome pyramid_oracle() {
  Checker c;
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> side(1, 8);
  std::uniform_int_distribution<int> chans(1, 3);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageShape shape{side(rng), side(rng), chans(rng)};
    const PyramidSpec spec = testing::random_spec(rng, std::max(shape.height, shape.width));
    auto p = init_zeros(spec, shape);
    for (auto& l : p.levels()) testing::fill_uniform(l.values, rng, -2.0 * spec.radius - 0.01, 2.0 * spec.radius + 0.01);
    const auto got = materialize(p, spec.radius);
    const auto want = testing::materialize_per_pixel(p, spec.radius);
    double err = got.size() == want.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(got.size(), want.size()); ++i) err = std::max(err, std::abs(got[i] - want[i]));
    worst = std::max(worst, err);
    c.expect(err <= 1e-12, "instance " + std::to_string(trial) + " err " + fmt(err));
  }
  c.note("1000 instances, max abs err " + fmt(worst));
  return c.done();
}

// ---------------------------------------------------------------------------
// 4. Level and input gradients against central differences.

Outcome gradient_checks() {
  Checker c;
  const double h = 1e-4;
  const ImageShape shape{8, 8, 3};
  const int classes = 4;
  const auto data = random_data(7, 3, shape, classes);
  PyramidSpec spec{.scales = {4, 2, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 0.004, .step_size = 0.0004,
                   .per_channel = true};
  double worst = 0.0;

  auto check_model = [&](const Classifier& model, const std::string& name, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto p = init_zeros(spec, shape);
    // Interior values keep every coordinate away from the clip boundary.
    for (auto& l : p.levels()) testing::fill_uniform(l.values, rng, -0.6 * spec.radius, 0.6 * spec.radius);
    auto loss_at = [&](const PyramidPerturbation& q, const ImageBatch& x) {
      const auto d = materialize(q, spec.radius);
      const auto xp = apply_perturbation(x, std::span<const std::vector<double>>(&d, 1));
      return forward_loss(model, xp, data.labels).loss;
    };
    const auto delta = materialize(p, spec.radius);
    const auto xp = apply_perturbation(data.images, std::span<const std::vector<double>>(&delta, 1));
    const auto gx = input_gradient(model, xp, data.labels);
    const auto gl = shared_level_gradients(p, spec.radius, data.images, delta, gx);

    std::uniform_int_distribution<std::size_t> pick_level(0, spec.scales.size() - 1);
    for (int t = 0; t < 20; ++t) {
      const std::size_t li = pick_level(rng);
      std::uniform_int_distribution<std::size_t> pick(0, p.level(li).values.size() - 1);
      const std::size_t j = pick(rng);
      const double fd = testing::central_difference(
          [&](double v) {
            auto q = p;
            q.level(li).values[j] = v;
            return loss_at(q, data.images);
          },
          p.level(li).values[j], h);
      const double err = testing::relative_error(gl[li].values[j], fd);
      worst = std::max(worst, err);
      c.expect(err <= 1e-4, name + " dL/d" + level_name(spec.scales[li]) + " rel err " + fmt(err));
    }
    std::uniform_int_distribution<std::size_t> pick_px(0, xp.pixels().size() - 1);
    for (int t = 0; t < 20; ++t) {
      const std::size_t j = pick_px(rng);
      const double fd = testing::central_difference(
          [&](double v) {
            ImageBatch x = xp;
            x.pixels()[j] = v;
            return forward_loss(model, x, data.labels).loss;
          },
          xp.pixels()[j], h);
      const double err = testing::relative_error(gx[j], fd);
      worst = std::max(worst, err);
      c.expect(err <= 1e-4, name + " dL/dx rel err " + fmt(err));
    }
  };
  // Production initialization scale for both models.
  const double init_std = ModelConfig{}.init_std;
  TinyVitConfig vc = testing::tiny_vit_config(shape, classes);
  vc.init_std = init_std;
  TinyViT vit(vc, 3);
  Mlp mlp(MlpConfig{.input = shape, .hidden = 16, .num_classes = classes, .init_std = init_std}, 3);
  check_model(vit, "tiny_vit", 11);
  check_model(mlp, "mlp", 12);
  c.note("max rel err " + fmt(worst));
  return c.done();
}

// ---------------------------------------------------------------------------
// 5. Universal optimum never exceeds the per-sample optimum.

struct JensenResult {
  double universal = 0.0;   // max_c mean_i L_i(c)
  double per_sample = 0.0;  // mean_i max_c L_i(c)
  bool argmaxes_coincide = false;
};

// Exhaustive search over a constant shift c added to every pixel.
JensenResult jensen_enumerate(const Classifier& model, const LabeledImages& data, double r) {
  const std::vector<double> values = {-r, -r / 2, 0.0, r / 2, r};
  const std::size_t n = data.size();
  std::vector<std::vector<double>> loss(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    const std::vector<double> d(data.images.shape().size(), values[v]);
    const auto xp = apply_perturbation(data.images, std::span<const std::vector<double>>(&d, 1));
    loss[v] = forward_loss(model, xp, data.labels).per_sample_loss;
  }
  JensenResult out;
  out.universal = -INFINITY;
  for (std::size_t v = 0; v < values.size(); ++v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += loss[v][i];
    out.universal = std::max(out.universal, s / static_cast<double>(n));
  }
  std::vector<std::size_t> arg(n, 0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t v = 1; v < values.size(); ++v) {
      if (loss[v][i] > loss[arg[i]][i]) arg[i] = v;
    }
    s += loss[arg[i]][i];
  }
  out.per_sample = s / static_cast<double>(n);
  out.argmaxes_coincide = std::all_of(arg.begin(), arg.end(), [&](std::size_t a) { return a == arg[0]; });
  return out;
}

Outcome jensen_bound() {
  Checker c;
  const double r = 8.0 / 255;
  auto check = [&](const std::string& name, const JensenResult& j) {
    c.expect(j.universal <= j.per_sample, name + ": universal > per-sample");
    if (j.argmaxes_coincide) {
      c.expect(j.universal == j.per_sample, name + ": coinciding argmaxes but gap");
    } else {
      c.expect(j.universal < j.per_sample, name + ": distinct argmaxes but equality");
    }
    c.note(name + " U=" + fmt(j.universal, 8) + " P=" + fmt(j.per_sample, 8) +
           (j.argmaxes_coincide ? " (argmaxes coincide)" : " (argmaxes differ)"));
  };
  // Frozen 4-sample instance on a small trained-free MLP.
  Mlp mlp(MlpConfig{.input = {4, 4, 1}, .hidden = 8, .num_classes = 3, .init_std = 1.0}, 5);
  const LabeledImages frozen = random_data(5, 4, {4, 4, 1}, 3);
  check("mlp", jensen_enumerate(mlp, frozen, r));
  // Linear probe: the loss is monotone in the shift, so each label fixes the argmax.
  testing::LinearProbe probe(4.0);
  LabeledImages mixed{ImageBatch(4, {1, 2, 1}, {0.2, 0.3, 0.5, 0.1, 0.4, 0.4, 0.7, 0.2}), {0, 1, 0, 1}};
  LabeledImages same = mixed;
  same.labels = {1, 1, 1, 1};
  const auto jm = jensen_enumerate(probe, mixed, r);
  const auto js = jensen_enumerate(probe, same, r);
  c.expect(!jm.argmaxes_coincide, "mixed labels should give distinct argmaxes");
  c.expect(js.argmaxes_coincide, "equal labels should give one argmax");
  check("probe-mixed", jm);
  check("probe-same", js);
  return c.done();
}

// ---------------------------------------------------------------------------
// 6. Free gradients equal a dedicated backward over the adversarial half.

// Test-side pullback: every pixel adds m_s * g to the tile that covers it,
// gated by the clip mask of the level value and the pixel clamp.
std::vector<LevelGrid> pullback_per_pixel(const PyramidPerturbation& p, double radius, const ImageBatch& clean,
                                          const std::vector<double>& delta, const std::vector<double>& grad) {
  const auto& spec = p.spec();
  const ImageShape t = p.target_shape();
  std::vector<LevelGrid> out;
  for (const auto& l : p.levels()) out.emplace_back(l.rows, l.cols, l.depth);
  for (std::size_t n = 0; n < clean.count(); ++n) {
    for (int y = 0; y < t.height; ++y) {
      for (int x = 0; x < t.width; ++x) {
        for (int ch = 0; ch < t.channels; ++ch) {
          const std::size_t px = (static_cast<std::size_t>(y) * t.width + x) * t.channels + ch;
          const double v = clean.image(n)[px] + delta[px];
          if (v < 0.0 || v > 1.0) continue;
          const double g = grad[n * t.size() + px];
          for (std::size_t li = 0; li < spec.scales.size(); ++li) {
            const int s = spec.scales[li];
            const int d = spec.per_channel ? ch : 0;
            const double lv = p.level(li).at(y / s, x / s, d);
            if (std::abs(lv) > radius) continue;
            out[li].at(y / s, x / s, d) += spec.multipliers[li] * g;
          }
        }
      }
    }
  }
  return out;
}

Outcome free_gradient() {
  Checker c;
  const ImageShape shape{8, 8, 3};
  TinyViT model(testing::tiny_vit_config(shape, 4), 21);
  AdamW opt(OptimizerConfig{}, model.parameters().size());
  CostLedger ledger;
  PyramidSpec spec{.scales = {4, 2, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 8.0 / 255, .step_size = 8.0 / 2550,
                   .per_channel = true};
  auto u = init_zeros(spec, shape);
  RadiusSchedule sched;
  sched.r_start = spec.radius;
  const double lambda = 0.7;
  double worst = 0.0;
  for (int step = 0; step < 10; ++step) {
    const auto data = random_data(300 + step, 6, shape, 4, 0.0, 1.0);
    const auto before = model.clone();
    const auto u_before = u;
    UpatStepTrace trace;
    train_step_upat(model, data.images, data.labels, u, opt, 1e-2, lambda, true, sched, 0, spec.radius / 10,
                    ledger, &trace);

    // Dedicated backward: loss = (lambda / B) sum_i CE(clamp(x_i + delta)).
    const auto delta = materialize(u_before, spec.radius);
    const auto xp = apply_perturbation(data.images, std::span<const std::vector<double>>(&delta, 1));
    auto gx = input_gradient(*before, xp, data.labels);
    for (double& g : gx) g *= lambda;
    const auto want = pullback_per_pixel(u_before, spec.radius, data.images, delta, gx);
    for (std::size_t li = 0; li < want.size(); ++li) {
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < want[li].values.size(); ++j) {
        num = std::max(num, std::abs(trace.level_grads[li].values[j] - want[li].values[j]));
        den = std::max(den, std::abs(want[li].values[j]));
      }
      const double err = num / std::max(den, 1e-300);
      worst = std::max(worst, err);
      c.expect(err <= 1e-6, "step " + std::to_string(step) + " level " + std::to_string(li) + " rel err " + fmt(err));
    }
  }
  c.note("10 steps, max rel err " + fmt(worst));
  return c.done();
}

// ---------------------------------------------------------------------------
// 7. Radius schedule against direct evaluation.

Outcome radius_schedule() {
  Checker c;
  auto direct = [](double rs, double re, int es, int ee, int e) {
    return rs + (re - rs) * std::max(e - es, 0) / static_cast<double>(ee - es);
  };
  struct Case {
    int e_start, e_end, epochs;
  };
  for (const Case k : {Case{30, 300, 300}, Case{3, 29, 30}}) {
    RadiusSchedule s;
    s.enabled = true;
    s.r_start = 8.0 / 255;
    s.r_end = 0.1 * s.r_start;
    s.e_start = k.e_start;
    s.e_end = k.e_end;
    const std::string tag = "[" + std::to_string(k.e_start) + "," + std::to_string(k.e_end) + "] ";
    c.expect(radius_at_epoch(s, k.e_start) == s.r_start, tag + "r(e_start)");
    c.expect(std::abs(radius_at_epoch(s, k.e_end) - s.r_end) <= 1e-15, tag + "r(e_end)");
    const int mid = (k.e_start + k.e_end) / 2;
    c.expect(std::abs(radius_at_epoch(s, mid) - direct(s.r_start, s.r_end, k.e_start, k.e_end, mid)) <= 1e-12,
             tag + "midpoint");
    double prev = INFINITY;
    for (int e = 0; e <= k.epochs; ++e) {
      const double r = radius_at_epoch(s, e);
      const double d = direct(s.r_start, s.r_end, k.e_start, k.e_end, std::min(e, k.e_end));
      c.expect(std::abs(r - d) <= 1e-12, tag + "epoch " + std::to_string(e));
      c.expect(r <= prev, tag + "increase at epoch " + std::to_string(e));
      prev = r;
    }
    if (k.e_start == 30) c.note("r(165)*255 = " + fmt(255 * radius_at_epoch(s, mid), 6));
  }
  // The config path produces the same schedule.
  ExperimentConfig cfg = desk_config();
  const RadiusSchedule s = cfg.train.radius_schedule();
  c.expect(s.r_start == 8.0 / 255 && s.r_end == 0.1 * s.r_start, "desk config radii");
  return c.done();
}

// ---------------------------------------------------------------------------
// 8. Sample-wise attacks beat the universal one on a trained model.

Outcome attack_strength_order() {
  Checker c;
  ExperimentConfig cfg = desk_config();
  cfg.train.method = Method::kUpat;
  cfg.train.epochs = 10;
  cfg.train.schedule.enabled = false;
  const DatasetSplits data = ingest_dataset(cfg.dataset);
  const auto result = run_training(cfg.train, architecture_json(cfg.model, cfg.dataset), data);
  const Classifier& model = *result.state.model;
  const double r = cfg.train.universal.spec.radius;
  AttackConfig a = cfg.train.attack;
  a.spec.scales = cfg.train.universal.spec.scales;
  a.spec.multipliers = cfg.train.universal.spec.multipliers;
  a.spec.per_channel = cfg.train.universal.spec.per_channel;
  a.num_steps = 5;
  a.step = StepSize::radius_over_steps();
  a.spec.step_size = r / 5;
  const UniversalAdversary uni{&*result.state.universal, r};
  const SamplewiseAdversary sw{a, r, derive_seed(0, kStreamEvaluation)};
  for (const auto& [name, split] : {std::pair<std::string, const LabeledImages*>{"train", &data.train},
                                    {"val", &data.val}}) {
    const auto su = attack_strength(model, *split, uni);
    const auto ss = attack_strength(model, *split, sw);
    c.expect(ss.increase > su.increase, name + ": sample-wise " + fmt(ss.increase) + " <= universal " + fmt(su.increase));
    c.note(name + " err+ sample-wise " + fmt(100 * ss.increase, 3) + "pt vs universal " + fmt(100 * su.increase, 3) + "pt");
  }
  c.note("clean val acc " + fmt(100 * result.state.history.back().val_clean_acc, 3) + "%");
  return c.done();
}

// ---------------------------------------------------------------------------
// 9. End-to-end desk ablation.

Outcome desk_experiment() {
  Checker c;
  ExperimentConfig cfg = desk_config();
  cfg.output_dir = UPAT_ACCEPTANCE_DIR;
  cfg.run_id = "desk";
  c.expect(cfg.train.method == Method::kUpat && cfg.train.lambda == 1.0 && cfg.train.universal.spec.radius == 8.0 / 255 &&
               cfg.train.schedule.enabled && cfg.train.epochs == 30 && cfg.ablate.seeds.size() == 3,
           "desk config does not match the required setting");
  const auto out = cmd_ablate(cfg, &std::cerr);
  std::map<std::string, std::vector<double>> acc;
  for (const auto& row : out.rows) acc[row.label].push_back(row.val_clean_acc);
  auto mean = [&](const std::string& label) {
    const auto& v = acc[label];
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? NAN : s / static_cast<double>(v.size());
  };
  const auto train_size = ingest_dataset(cfg.dataset).train.size();
  c.expect(train_size >= 5000, "train split has " + std::to_string(train_size) + " images");
  const double base = mean("baseline");
  const double upat = mean("upat");
  const double flat = mean("upat_flat");
  const double no_clean = mean("upat_no_clean");
  c.expect(upat >= base - 0.002, "upat " + fmt(100 * upat, 4) + " < baseline - 0.2");
  c.expect(no_clean < base, "upat_no_clean " + fmt(100 * no_clean, 4) + " >= baseline");
  c.expect(flat <= base, "upat_flat " + fmt(100 * flat, 4) + " > baseline");
  c.note("mean val acc % baseline " + fmt(100 * base, 4) + ", upat " + fmt(100 * upat, 4) + ", upat_flat " +
         fmt(100 * flat, 4) + ", upat_no_clean " + fmt(100 * no_clean, 4) + "; table at " +
         (out.dir / "results.csv").string());
  return c.done();
}

// ---------------------------------------------------------------------------
// 10. Instrument sanity.

Outcome instrument_sanity() {
  Checker c;
  const ImageShape shape{8, 8, 3};
  TinyViT model(testing::tiny_vit_config(shape, 4), 41);
  const auto data = random_data(41, 32, shape, 4, 0.0, 1.0);

  const auto grid = loss_landscape(model, data, 5, 1.0, 3);
  const double center = forward_loss(model, data.images, data.labels).loss;
  c.expect(std::abs(grid.at(2, 2) - center) <= 1e-6, "landscape center off by " + fmt(grid.at(2, 2) - center));

  const double clean = evaluate_accuracy(model, data).accuracy;
  const std::vector<std::string> ident = {"identity"};
  const auto corr = corruption_eval(model, data, ident, 0);
  for (const auto& [sev, a] : corr.at("identity")) c.expect(a == clean, "identity severity " + std::to_string(sev));

  PyramidSpec spec{.scales = {4, 2, 1}, .multipliers = {20.0, 10.0, 1.0}, .radius = 8.0 / 255, .step_size = 0.003,
                   .per_channel = true};
  auto u = init_zeros(spec, shape);
  std::mt19937_64 rng(2);
  for (auto& l : u.levels()) testing::fill_uniform(l.values, rng, -spec.radius, spec.radius);
  AttackConfig a;
  a.spec = spec;
  a.num_steps = 5;
  c.expect(attack_strength(model, data, UniversalAdversary{&u, 0.0}).increase == 0.0, "universal r=0");
  c.expect(attack_strength(model, data, SamplewiseAdversary{a, 0.0, 1}).increase == 0.0, "sample-wise r=0");

  const fs::path root = fs::path(UPAT_ACCEPTANCE_DIR) / "resume";
  fs::remove_all(root);
  ExperimentConfig cfg = testing::small_experiment((root / "whole").string());
  cfg.run_id = "resume";
  cfg.train.method = Method::kUpat;
  const auto whole = cmd_train(cfg);
  cfg.output_dir = (root / "split").string();
  cmd_train(cfg, {.stop_after = 1});
  const auto resumed = cmd_train(cfg);
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  c.expect(resumed.resumed, "second run did not resume");
  c.expect(read(whole.dir / "metrics.jsonl") == read(resumed.dir / "metrics.jsonl"), "metrics differ after resume");
  c.expect(whole.summary.at("parameter_hash") == resumed.summary.at("parameter_hash"), "parameters differ after resume");
  c.note("resume after 1 of " + std::to_string(cfg.train.epochs) + " epochs");
  fs::remove_all(root);
  return c.done();
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"cost-model exactness", cost_model},
      {"wall-clock ordering", wall_clock},
      {"pyramid oracle", pyramid_oracle},
      {"gradient checks", gradient_checks},
      {"Jensen bound", jensen_bound},
      {"free-gradient equivalence", free_gradient},
      {"radius schedule", radius_schedule},
      {"attack-strength ordering", attack_strength_order},
      {"end-to-end desk experiment", desk_experiment},
      {"instrument sanity", instrument_sanity},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(all.size()); ++i) selected.push_back(i);
  }
  int failed = 0;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(all.size())) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const Criterion& k = all[id - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = k.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, k.name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
