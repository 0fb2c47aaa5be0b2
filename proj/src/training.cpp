// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "upat/errors.hpp"
#include "upat/evaluation.hpp"
#include "upat/seeding.hpp"

namespace upat {

namespace {

double mean_of(std::span<const double> v, std::size_t begin, std::size_t end) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

std::size_t correct_in(const PassResult& r, std::span<const int> labels, std::size_t row_offset, int k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = r.logits.data() + (row_offset + i) * k;
    if (std::max_element(row, row + k) - row == labels[i]) ++hits;
  }
  return hits;
}

std::vector<int> doubled(std::span<const int> labels) {
  std::vector<int> y(labels.begin(), labels.end());
  y.insert(y.end(), labels.begin(), labels.end());
  return y;
}

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

nlohmann::json nullable(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double from_nullable(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("train.lambda must be >= 0");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (optimizer.warmup_epochs < 0 || optimizer.warmup_epochs > epochs) {
    throw ConfigError("optimizer.warmup_epochs must lie in [0, epochs]");
  }
  if (!(optimizer.lr >= 0.0) || !(optimizer.weight_decay >= 0.0)) {
    throw ConfigError("optimizer.lr and optimizer.weight_decay must be non-negative");
  }
  if (augment.crop_padding < 0) throw ConfigError("augment.crop_padding must be non-negative");
  try {
    attack.validate();
    universal.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(universal.step.value > 0.0) && !(universal.step.relative && universal.step.value == 0.0)) {
    throw ConfigError("universal.step_size must be positive");
  }
  if (schedule.enabled) {
    if (!(schedule.end_ratio >= 0.0 && schedule.end_ratio <= 1.0)) {
      throw ConfigError("schedule.end_ratio must lie in [0, 1]");
    }
    radius_schedule().validate();
  }
}

PyramidSpec TrainConfig::universal_spec() const {
  PyramidSpec s = universal.spec;
  if (method == Method::kUpatFlat) {
    s.scales = {1};
    s.multipliers = {1.0};
  }
  return s;
}

double TrainConfig::base_radius() const {
  if (method == Method::kPat) return attack.spec.radius;
  if (is_universal(method)) return universal.spec.radius;
  return 0.0;
}

RadiusSchedule TrainConfig::radius_schedule() const {
  RadiusSchedule r;
  r.r_start = base_radius();
  r.r_end = schedule.end_ratio * r.r_start;
  r.e_start = schedule.e_start;
  r.e_end = schedule.e_end > 0 ? schedule.e_end : epochs;
  r.enabled = schedule.enabled;
  return r;
}

StepMetrics train_step_baseline(Classifier& model, const ImageBatch& images, std::span<const int> labels,
                                AdamW& opt, double lr, CostLedger& ledger) {
  if (images.empty()) throw std::invalid_argument("train_step_baseline: empty batch");
  const std::size_t b = images.count();
  const std::vector<double> w(b, 1.0 / static_cast<double>(b));
  const PassResult r = model.run(images, labels, w, {.parameters = true, .inputs = false});
  ledger.record(PassPurpose::kTraining, b, b, true);
  opt.step(model.parameters(), r.param_grad, lr);
  StepMetrics m;
  m.loss = r.loss;
  m.clean_loss = r.loss;
  m.clean_correct = correct_in(r, labels, 0, model.num_classes());
  m.count = b;
  return m;
}

StepMetrics train_step_pat(Classifier& model, const ImageBatch& images, std::span<const int> labels, AdamW& opt,
                           double lr, const AttackConfig& attack, double lambda, double radius,
                           CostLedger& ledger, std::mt19937_64& rng) {
  if (images.empty()) throw std::invalid_argument("train_step_pat: empty batch");
  const std::size_t b = images.count();
  const AttackResult adv = pgd_pyramid_attack(model, images, labels, attack, radius, &ledger, rng);

  ImageBatch combined = images;
  combined.append(adv.perturbed);
  const std::vector<int> y = doubled(labels);
  std::vector<double> w(2 * b, 1.0 / static_cast<double>(b));
  std::fill(w.begin() + b, w.end(), lambda / static_cast<double>(b));
  const PassResult r = model.run(combined, y, w, {.parameters = true, .inputs = false});
  ledger.record(PassPurpose::kTraining, 2 * b, b, true);
  opt.step(model.parameters(), r.param_grad, lr);

  StepMetrics m;
  m.loss = r.loss;
  m.clean_loss = mean_of(r.per_sample_loss, 0, b);
  m.adv_loss = mean_of(r.per_sample_loss, b, 2 * b);
  m.clean_correct = correct_in(r, labels, 0, model.num_classes());
  m.adv_correct = correct_in(r, labels, b, model.num_classes());
  m.count = b;
  return m;
}

StepMetrics train_step_upat(Classifier& model, const ImageBatch& images, std::span<const int> labels,
                            PyramidPerturbation& universal, AdamW& opt, double lr, double lambda,
                            bool include_clean, const RadiusSchedule& schedule, int epoch, double step,
                            CostLedger& ledger, UpatStepTrace* trace) {
  if (images.empty()) throw std::invalid_argument("train_step_upat: empty batch");
  if (!(universal.target_shape() == images.shape())) {
    throw std::invalid_argument("train_step_upat: universal perturbation shape does not match the batch");
  }
  const std::size_t b = images.count();
  const std::size_t isz = images.shape().size();
  const double radius = radius_at_epoch(schedule, epoch);

  const std::vector<double> delta = materialize(universal, radius);
  const ImageBatch perturbed = apply_perturbation(images, std::span<const std::vector<double>>(&delta, 1));

  ImageBatch batch;
  std::vector<int> y;
  std::vector<double> w;
  const double inv_b = 1.0 / static_cast<double>(b);
  if (include_clean) {
    batch = images;
    batch.append(perturbed);
    y = doubled(labels);
    w.assign(2 * b, inv_b);
    std::fill(w.begin() + b, w.end(), lambda * inv_b);
  } else {
    batch = perturbed;
    y.assign(labels.begin(), labels.end());
    w.assign(b, inv_b);
  }
  const PassResult r = model.run(batch, y, w, {.parameters = true, .inputs = true});
  ledger.record(PassPurpose::kTraining, batch.count(), b, true);

  const std::size_t adv_offset = include_clean ? b : 0;
  const std::span<const double> adv_grad(r.input_grad.data() + adv_offset * isz, b * isz);
  std::vector<LevelGrid> level_grads = shared_level_gradients(universal, radius, images, delta, adv_grad);

  opt.step(model.parameters(), r.param_grad, lr);
  universal = universal_update(std::move(universal), level_grads, schedule, epoch, step);

  StepMetrics m;
  m.loss = r.loss;
  if (include_clean) {
    m.clean_loss = mean_of(r.per_sample_loss, 0, b);
    m.clean_correct = correct_in(r, labels, 0, model.num_classes());
  }
  m.adv_loss = mean_of(r.per_sample_loss, adv_offset, adv_offset + b);
  m.adv_correct = correct_in(r, labels, adv_offset, model.num_classes());
  m.count = b;
  if (trace) {
    trace->level_grads = std::move(level_grads);
    trace->param_grad = r.param_grad;
    trace->perturbed = perturbed;
  }
  return m;
}

bool EpochRecord::operator==(const EpochRecord& o) const {
  return epoch == o.epoch && method == o.method && same_double(radius, o.radius) && same_double(lr, o.lr) &&
         same_double(train_loss, o.train_loss) && same_double(clean_loss, o.clean_loss) &&
         same_double(adv_loss, o.adv_loss) && same_double(train_clean_acc, o.train_clean_acc) &&
         same_double(train_adv_acc, o.train_adv_acc) && same_double(val_clean_acc, o.val_clean_acc) &&
         same_double(val_loss, o.val_loss) && same_double(adv_err_increase, o.adv_err_increase) &&
         same_double(cumulative_units, o.cumulative_units);
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"schema_version", kMetricsSchemaVersion},
          {"epoch", r.epoch},
          {"method", r.method},
          {"radius", r.radius},
          {"lr", r.lr},
          {"train_loss", nullable(r.train_loss)},
          {"clean_loss", nullable(r.clean_loss)},
          {"adv_loss", nullable(r.adv_loss)},
          {"train_clean_acc", nullable(r.train_clean_acc)},
          {"train_adv_acc", nullable(r.train_adv_acc)},
          {"val_clean_acc", r.val_clean_acc},
          {"val_loss", nullable(r.val_loss)},
          {"adv_err_increase", nullable(r.adv_err_increase)},
          {"cumulative_units", r.cumulative_units}};
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != kMetricsSchemaVersion) {
    throw DataError("unsupported metrics schema version");
  }
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.method = j.at("method").get<std::string>();
  r.radius = j.at("radius").get<double>();
  r.lr = j.at("lr").get<double>();
  r.train_loss = from_nullable(j.at("train_loss"));
  r.clean_loss = from_nullable(j.at("clean_loss"));
  r.adv_loss = from_nullable(j.at("adv_loss"));
  r.train_clean_acc = from_nullable(j.at("train_clean_acc"));
  r.train_adv_acc = from_nullable(j.at("train_adv_acc"));
  r.val_clean_acc = j.at("val_clean_acc").get<double>();
  r.val_loss = from_nullable(j.at("val_loss"));
  r.adv_err_increase = from_nullable(j.at("adv_err_increase"));
  r.cumulative_units = j.at("cumulative_units").get<double>();
  return r;
}

std::size_t steps_per_epoch(std::size_t n_train, int batch_size) {
  return (n_train + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size);
}

TrainingState init_training(const TrainConfig& cfg, const nlohmann::json& architecture, ImageShape input_shape) {
  cfg.validate();
  TrainingState st;
  st.model = make_classifier(architecture, derive_seed(cfg.seed, kStreamModelInit));
  if (!(st.model->input_shape() == input_shape)) {
    throw ConfigError("model input shape does not match the dataset image shape");
  }
  st.optimizer = AdamW(cfg.optimizer, st.model->parameters().size());
  if (is_universal(cfg.method)) {
    try {
      st.universal = init_zeros(cfg.universal_spec(), input_shape);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("universal pyramid: ") + e.what());
    }
  }
  st.rng = make_rng(cfg.seed, kStreamTraining);
  return st;
}

void run_training(TrainingState& st, const TrainConfig& cfg, const DatasetSplits& data,
                  const EpochCallback& on_epoch, int stop_after) {
  cfg.validate();
  const std::size_t n = data.train.size();
  if (n == 0) throw DataError("training split is empty");
  if (data.val.size() == 0) throw DataError("validation split is empty");
  const std::size_t bsz = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t spe = steps_per_epoch(n, cfg.batch_size);
  const RadiusSchedule schedule = cfg.radius_schedule();
  const int last = stop_after >= 0 ? std::min(stop_after, cfg.epochs) : cfg.epochs;

  for (int e = st.next_epoch; e < last; ++e) {
    const double radius = cfg.method == Method::kBaseline ? 0.0 : radius_at_epoch(schedule, e);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), st.rng);

    double loss_sum = 0.0, clean_sum = 0.0, adv_sum = 0.0;
    std::size_t seen = 0, clean_hits = 0, adv_hits = 0;
    bool has_clean = false, has_adv = false;
    double lr = 0.0;
    for (std::size_t s = 0; s < spe; ++s) {
      const std::size_t begin = s * bsz;
      const std::size_t end = std::min(n, begin + bsz);
      const LabeledImages batch =
          data.train.subset(std::span<const std::size_t>(order.data() + begin, end - begin));
      const ImageBatch x = augment(batch.images, cfg.augment, st.rng);
      lr = learning_rate(cfg.optimizer, st.global_step, static_cast<std::int64_t>(spe), cfg.epochs);
      StepMetrics m;
      const std::string context = "epoch " + std::to_string(e) + " step " + std::to_string(s) + ": ";
      try {
        switch (cfg.method) {
          case Method::kBaseline:
            m = train_step_baseline(*st.model, x, batch.labels, st.optimizer, lr, st.ledger);
            break;
          case Method::kPat:
            m = train_step_pat(*st.model, x, batch.labels, st.optimizer, lr, cfg.attack, cfg.lambda, radius,
                               st.ledger, st.rng);
            break;
          case Method::kUpat:
          case Method::kUpatFlat:
          case Method::kUpatNoClean:
            m = train_step_upat(*st.model, x, batch.labels, *st.universal, st.optimizer, lr, cfg.lambda,
                                cfg.method != Method::kUpatNoClean, schedule, e,
                                cfg.universal.step.resolve(radius, 1), st.ledger);
            break;
        }
      } catch (const NumericError& err) {
        throw NumericError(context + err.what());
      } catch (const std::invalid_argument& err) {
        throw std::runtime_error(context + err.what());
      }
      ++st.global_step;
      const double cnt = static_cast<double>(m.count);
      seen += m.count;
      loss_sum += m.loss * cnt;
      if (!std::isnan(m.clean_loss)) {
        has_clean = true;
        clean_sum += m.clean_loss * cnt;
        clean_hits += m.clean_correct;
      }
      if (!std::isnan(m.adv_loss)) {
        has_adv = true;
        adv_sum += m.adv_loss * cnt;
        adv_hits += m.adv_correct;
      }
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.method = std::string(method_name(cfg.method));
    rec.radius = radius;
    rec.lr = lr;
    const double dn = static_cast<double>(seen);
    rec.train_loss = loss_sum / dn;
    if (has_clean) {
      rec.clean_loss = clean_sum / dn;
      rec.train_clean_acc = static_cast<double>(clean_hits) / dn;
    }
    if (has_adv) {
      rec.adv_loss = adv_sum / dn;
      rec.train_adv_acc = static_cast<double>(adv_hits) / dn;
    }
    try {
      const AccuracyResult val = evaluate_accuracy(*st.model, data.val);
      rec.val_clean_acc = val.accuracy;
      rec.val_loss = val.loss;
    } catch (const NumericError& err) {
      throw NumericError("epoch " + std::to_string(e) + " validation: " + err.what());
    }
    if (cfg.eval_adversarial && cfg.method != Method::kBaseline) {
      if (st.universal) {
        rec.adv_err_increase =
            attack_strength(*st.model, data.val, UniversalAdversary{&*st.universal, radius}).increase;
      } else {
        rec.adv_err_increase =
            attack_strength(*st.model, data.val,
                            SamplewiseAdversary{cfg.attack, radius, derive_seed(cfg.seed, kStreamEvaluation + e)})
                .increase;
      }
    }
    rec.cumulative_units = st.ledger.total_units();
    st.next_epoch = e + 1;
    st.history.push_back(rec);
    if (on_epoch) on_epoch(rec, st);
  }
}

TrainingResult run_training(const TrainConfig& cfg, const nlohmann::json& architecture, const DatasetSplits& data) {
  TrainingResult out{init_training(cfg, architecture, data.train.images.shape()), {}};
  run_training(out.state, cfg, data);
  const int steps = static_cast<int>(std::max<std::int64_t>(out.state.global_step, 1));
  out.cost = report_from_ledger(cfg.method, cfg.method == Method::kPat ? cfg.attack.num_steps : 0,
                                out.state.ledger, steps);
  return out;
}

}  // namespace upat
