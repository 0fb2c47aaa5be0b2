// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <yaml-cpp/yaml.h>

#include "upat/errors.hpp"
#include "upat/evaluation.hpp"

namespace upat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_plain_real(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("expected a real number, got '" + std::string(s) + "'");
  }
  return v;
}

std::int64_t parse_integer(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_unsigned64(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty()) {
    throw std::runtime_error("expected a non-negative integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "off" || s == "no") return false;
  throw std::runtime_error("expected a boolean (true/false/on/off), got '" + std::string(s) + "'");
}

std::string scalar(const YAML::Node& n) {
  if (!n.IsScalar()) throw std::runtime_error("expected a scalar value");
  return n.Scalar();
}

template <typename T, typename F>
std::vector<T> parse_list(const YAML::Node& n, F&& item) {
  if (!n.IsSequence()) throw std::runtime_error("expected a list");
  std::vector<T> out;
  for (const auto& e : n) out.push_back(item(scalar(e)));
  return out;
}

std::string format_step(const StepSize& s) {
  if (!s.relative) return format_real(s.value);
  if (s.value <= 0.0) return "radius/steps";
  return "radius/" + format_real(s.value);
}

StepSize parse_step(std::string_view text) {
  text = trim(text);
  constexpr std::string_view kPrefix = "radius/";
  if (text.substr(0, kPrefix.size()) == kPrefix) {
    const std::string_view rest = text.substr(kPrefix.size());
    if (rest == "steps") return StepSize::radius_over_steps();
    const double d = parse_plain_real(rest);
    if (!(d > 0.0)) throw std::runtime_error("step divisor must be positive");
    return StepSize::radius_over(d);
  }
  return StepSize::explicit_value(parse_real(text));
}

// Keeps the spec's stored step consistent with the configured rule.
void sync_step(PyramidSpec& spec, const StepSize& step, int steps, double fallback) {
  const double tau = step.resolve(spec.radius, steps);
  spec.step_size = tau > 0.0 ? tau : fallback;
}

Method parse_method_or_throw(const std::string& s) {
  try {
    return parse_method(s);
  } catch (const ConfigError& e) {
    throw std::runtime_error(e.what());
  }
}

class MapReader {
 public:
  MapReader(YAML::Node node, std::string path, std::vector<std::string>& errors)
      : node_(std::move(node)), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) {
      errors_.push_back(where() + "expected a mapping");
      node_.reset();
    }
  }
  ~MapReader() {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string key = kv.first.as<std::string>();
      if (!used_.count(key)) errors_.push_back("unknown key '" + path_ + key + "'");
    }
  }
  MapReader(const MapReader&) = delete;
  MapReader& operator=(const MapReader&) = delete;

  template <typename F>
  void field(const std::string& key, F&& apply) {
    used_.insert(key);
    if (!node_ || !node_.IsMap()) return;
    const YAML::Node value = std::as_const(node_)[key];
    if (!value) return;
    try {
      apply(value);
    } catch (const std::exception& e) {
      errors_.push_back(path_ + key + ": " + e.what());
    }
  }

  void real(const std::string& key, double& out) {
    field(key, [&](const YAML::Node& n) { out = parse_real(scalar(n)); });
  }
  void integer(const std::string& key, int& out) {
    field(key, [&](const YAML::Node& n) {
      const std::int64_t v = parse_integer(scalar(n));
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw std::runtime_error("integer out of range");
      }
      out = static_cast<int>(v);
    });
  }
  void unsigned64(const std::string& key, std::uint64_t& out) {
    field(key, [&](const YAML::Node& n) { out = parse_unsigned64(scalar(n)); });
  }
  void boolean(const std::string& key, bool& out) {
    field(key, [&](const YAML::Node& n) { out = parse_bool(scalar(n)); });
  }
  void string(const std::string& key, std::string& out) {
    field(key, [&](const YAML::Node& n) { out = n.IsNull() ? std::string() : scalar(n); });
  }

  MapReader child(const std::string& key) {
    used_.insert(key);
    YAML::Node sub;
    if (node_ && node_.IsMap() && std::as_const(node_)[key]) sub.reset(std::as_const(node_)[key]);
    return MapReader(sub, path_ + key + ".", errors_);
  }

  const YAML::Node& node() const { return node_; }

 private:
  std::string where() const { return path_.empty() ? std::string("config: ") : path_.substr(0, path_.size() - 1) + ": "; }

  YAML::Node node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
};

void read_pyramid(MapReader& r, PyramidSpec& spec) {
  r.field("radius", [&](const YAML::Node& n) { spec.radius = parse_real(scalar(n)); });
  r.field("scales", [&](const YAML::Node& n) {
    spec.scales = parse_list<int>(n, [](const std::string& s) { return static_cast<int>(parse_integer(s)); });
  });
  r.field("multipliers", [&](const YAML::Node& n) { spec.multipliers = parse_list<double>(n, parse_real); });
  r.boolean("per_channel", spec.per_channel);
}

void emit_pyramid(YAML::Emitter& out, const PyramidSpec& spec) {
  out << YAML::Key << "radius" << YAML::Value << format_radius(spec.radius);
  out << YAML::Key << "scales" << YAML::Value << YAML::Flow << spec.scales;
  out << YAML::Key << "multipliers" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double m : spec.multipliers) out << format_real(m);
  out << YAML::EndSeq;
  out << YAML::Key << "per_channel" << YAML::Value << spec.per_channel;
}

ExperimentConfig from_tree(const YAML::Node& root) {
  std::vector<std::string> errors;
  ExperimentConfig c;
  {
    MapReader top(root, "", errors);
    top.string("run_id", c.run_id);
    top.string("output_dir", c.output_dir);
    top.integer("checkpoint_every", c.checkpoint_every);
    {
      MapReader d = top.child("dataset");
      d.string("name", c.dataset.name);
      d.string("root", c.dataset.root);
      d.integer("num_samples", c.dataset.num_samples);
      d.integer("num_classes", c.dataset.num_classes);
      d.integer("image_size", c.dataset.image_size);
      d.integer("channels", c.dataset.channels);
      d.real("train_fraction", c.dataset.train_fraction);
      d.real("val_fraction", c.dataset.val_fraction);
      d.real("noise", c.dataset.noise);
      d.real("jitter", c.dataset.jitter);
      d.unsigned64("seed", c.dataset.seed);
      d.field("checksums", [&](const YAML::Node& n) {
        if (!n.IsMap()) throw std::runtime_error("expected a mapping of file name to SHA-256");
        c.dataset.checksums.clear();
        for (const auto& kv : n) c.dataset.checksums[kv.first.as<std::string>()] = scalar(kv.second);
      });
    }
    {
      MapReader m = top.child("model");
      m.string("kind", c.model.kind);
      m.integer("patch_size", c.model.patch_size);
      m.integer("embed_dim", c.model.embed_dim);
      m.integer("depth", c.model.depth);
      m.integer("num_heads", c.model.num_heads);
      m.integer("mlp_ratio", c.model.mlp_ratio);
      m.integer("hidden", c.model.hidden);
      m.real("init_std", c.model.init_std);
    }
    {
      TrainConfig& t = c.train;
      MapReader r = top.child("train");
      r.field("method", [&](const YAML::Node& n) { t.method = parse_method_or_throw(scalar(n)); });
      r.real("lambda", t.lambda);
      r.integer("epochs", t.epochs);
      r.integer("batch_size", t.batch_size);
      r.unsigned64("seed", t.seed);
      r.boolean("eval_adversarial", t.eval_adversarial);
      {
        MapReader o = r.child("optimizer");
        o.real("lr", t.optimizer.lr);
        o.real("weight_decay", t.optimizer.weight_decay);
        o.real("beta1", t.optimizer.beta1);
        o.real("beta2", t.optimizer.beta2);
        o.real("eps", t.optimizer.eps);
        o.integer("warmup_epochs", t.optimizer.warmup_epochs);
      }
      {
        MapReader a = r.child("augment");
        a.boolean("flip", t.augment.flip);
        a.integer("crop_padding", t.augment.crop_padding);
      }
      {
        MapReader a = r.child("attack");
        a.integer("steps", t.attack.num_steps);
        read_pyramid(a, t.attack.spec);
        a.boolean("random_init", t.attack.random_init);
        a.field("step_size", [&](const YAML::Node& n) { t.attack.step = parse_step(scalar(n)); });
      }
      {
        MapReader u = r.child("universal");
        read_pyramid(u, t.universal.spec);
        u.field("step_size", [&](const YAML::Node& n) { t.universal.step = parse_step(scalar(n)); });
      }
      {
        MapReader s = r.child("schedule");
        s.boolean("enabled", t.schedule.enabled);
        s.real("end_ratio", t.schedule.end_ratio);
        s.integer("e_start", t.schedule.e_start);
        s.integer("e_end", t.schedule.e_end);
      }
    }
    {
      MapReader e = top.child("eval");
      e.integer("landscape_grid", c.eval.landscape_grid);
      e.real("landscape_span", c.eval.landscape_span);
      e.integer("landscape_samples", c.eval.landscape_samples);
      e.field("corruptions", [&](const YAML::Node& n) {
        c.eval.corruptions = parse_list<std::string>(n, [](const std::string& s) { return s; });
      });
      e.integer("max_severity", c.eval.max_severity);
    }
    {
      MapReader a = top.child("ablate");
      a.field("pat_steps", [&](const YAML::Node& n) {
        c.ablate.pat_steps = parse_list<int>(n, [](const std::string& s) { return static_cast<int>(parse_integer(s)); });
      });
      a.field("radii", [&](const YAML::Node& n) { c.ablate.radii = parse_list<double>(n, parse_real); });
      a.field("seeds", [&](const YAML::Node& n) {
        c.ablate.seeds = parse_list<std::uint64_t>(n, parse_unsigned64);
      });
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  sync_step(c.train.attack.spec, c.train.attack.step, c.train.attack.num_steps, 6.0 / 255.0 / 5.0);
  sync_step(c.train.universal.spec, c.train.universal.step, 1, 8.0 / 255.0 / 10.0);
  c.validate();
  return c;
}

void set_path(YAML::Node root, const std::string& dotted, const std::string& value) {
  if (dotted.empty()) throw ConfigError("empty override key");
  YAML::Node cur;
  cur.reset(root);
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError("malformed override key '" + dotted + "'");
    if (dot == std::string::npos) {
      const std::string_view v = trim(value);
      cur[key] = (!v.empty() && v.front() == '[') ? YAML::Load(std::string(v)) : YAML::Node(std::string(v));
      return;
    }
    YAML::Node next = cur[key];
    if (!next || next.IsNull()) {
      cur[key] = YAML::Node(YAML::NodeType::Map);
      next = cur[key];
    } else if (!next.IsMap()) {
      throw ConfigError("override '" + dotted + "': '" + key + "' is not a section");
    }
    cur.reset(next);
    pos = dot + 1;
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  dataset.validate();
  train.validate();
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (run_id.find('/') != std::string::npos) throw ConfigError("run_id must not contain '/'");
  if (model.kind != "tiny_vit" && model.kind != "mlp") {
    throw ConfigError("model.kind must be tiny_vit or mlp, got '" + model.kind + "'");
  }
  if (eval.landscape_grid < 1 || eval.landscape_grid % 2 == 0) throw ConfigError("eval.landscape_grid must be odd");
  if (!(eval.landscape_span > 0.0)) throw ConfigError("eval.landscape_span must be positive");
  if (eval.landscape_samples < 1) throw ConfigError("eval.landscape_samples must be positive");
  if (eval.max_severity < 0 || eval.max_severity > kMaxSeverity) {
    throw ConfigError("eval.max_severity must lie in [0, " + std::to_string(kMaxSeverity) + "]");
  }
  for (const auto& name : eval.corruptions) {
    const auto& known = corruption_names();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw ConfigError("eval.corruptions: unknown corruption '" + name + "'");
    }
  }
  for (int k : ablate.pat_steps) {
    if (k < 1) throw ConfigError("ablate.pat_steps entries must be at least 1");
  }
  for (double r : ablate.radii) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("ablate.radii entries must be positive");
  }
  if (ablate.seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
  make_classifier(architecture_json(model, dataset), 0);
}

nlohmann::json architecture_json(const ModelConfig& m, const DatasetDescriptor& d) {
  nlohmann::json j = {{"kind", m.kind},
                      {"image_height", d.image_size},
                      {"image_width", d.image_size},
                      {"channels", d.channels},
                      {"num_classes", d.num_classes},
                      {"init_std", m.init_std}};
  if (m.kind == "mlp") {
    j["hidden"] = m.hidden;
  } else {
    j["patch_size"] = m.patch_size;
    j["embed_dim"] = m.embed_dim;
    j["depth"] = m.depth;
    j["num_heads"] = m.num_heads;
    j["mlp_ratio"] = m.mlp_ratio;
  }
  return j;
}

double parse_real(std::string_view text) {
  text = trim(text);
  const std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return parse_plain_real(text);
  const double num = parse_plain_real(text.substr(0, slash));
  const double den = parse_plain_real(text.substr(slash + 1));
  if (den == 0.0) throw std::runtime_error("zero denominator in '" + std::string(text) + "'");
  return num / den;
}

std::string format_real(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_real failed");
  return std::string(buf, end);
}

std::string format_radius(double v) {
  if (v == 0.0) return "0";
  const double n = v * 255.0;
  for (int digits = 0; digits <= 6; ++digits) {
    const double scale = std::pow(10.0, digits);
    const std::string s = format_real(std::round(n * scale) / scale) + "/255";
    if (parse_real(s) == v) return s;
  }
  return format_real(v);
}

std::string serialize_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "run_id" << YAML::Value << YAML::DoubleQuoted << c.run_id;
  out << YAML::Key << "output_dir" << YAML::Value << YAML::DoubleQuoted << c.output_dir;
  out << YAML::Key << "checkpoint_every" << YAML::Value << c.checkpoint_every;

  const DatasetDescriptor& d = c.dataset;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << d.name;
  out << YAML::Key << "root" << YAML::Value << YAML::DoubleQuoted << d.root;
  out << YAML::Key << "num_samples" << YAML::Value << d.num_samples;
  out << YAML::Key << "num_classes" << YAML::Value << d.num_classes;
  out << YAML::Key << "image_size" << YAML::Value << d.image_size;
  out << YAML::Key << "channels" << YAML::Value << d.channels;
  out << YAML::Key << "train_fraction" << YAML::Value << format_real(d.train_fraction);
  out << YAML::Key << "val_fraction" << YAML::Value << format_real(d.val_fraction);
  out << YAML::Key << "noise" << YAML::Value << format_real(d.noise);
  out << YAML::Key << "jitter" << YAML::Value << format_real(d.jitter);
  out << YAML::Key << "seed" << YAML::Value << d.seed;
  out << YAML::Key << "checksums" << YAML::Value << YAML::BeginMap;
  for (const auto& [file, sum] : d.checksums) out << YAML::Key << file << YAML::Value << YAML::DoubleQuoted << sum;
  out << YAML::EndMap << YAML::EndMap;

  const ModelConfig& m = c.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << m.kind;
  out << YAML::Key << "patch_size" << YAML::Value << m.patch_size;
  out << YAML::Key << "embed_dim" << YAML::Value << m.embed_dim;
  out << YAML::Key << "depth" << YAML::Value << m.depth;
  out << YAML::Key << "num_heads" << YAML::Value << m.num_heads;
  out << YAML::Key << "mlp_ratio" << YAML::Value << m.mlp_ratio;
  out << YAML::Key << "hidden" << YAML::Value << m.hidden;
  out << YAML::Key << "init_std" << YAML::Value << format_real(m.init_std);
  out << YAML::EndMap;

  const TrainConfig& t = c.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "method" << YAML::Value << std::string(method_name(t.method));
  out << YAML::Key << "lambda" << YAML::Value << format_real(t.lambda);
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  out << YAML::Key << "seed" << YAML::Value << t.seed;
  out << YAML::Key << "eval_adversarial" << YAML::Value << t.eval_adversarial;
  out << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lr" << YAML::Value << format_real(t.optimizer.lr);
  out << YAML::Key << "weight_decay" << YAML::Value << format_real(t.optimizer.weight_decay);
  out << YAML::Key << "beta1" << YAML::Value << format_real(t.optimizer.beta1);
  out << YAML::Key << "beta2" << YAML::Value << format_real(t.optimizer.beta2);
  out << YAML::Key << "eps" << YAML::Value << format_real(t.optimizer.eps);
  out << YAML::Key << "warmup_epochs" << YAML::Value << t.optimizer.warmup_epochs;
  out << YAML::EndMap;
  out << YAML::Key << "augment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "flip" << YAML::Value << t.augment.flip;
  out << YAML::Key << "crop_padding" << YAML::Value << t.augment.crop_padding;
  out << YAML::EndMap;
  out << YAML::Key << "attack" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "steps" << YAML::Value << t.attack.num_steps;
  emit_pyramid(out, t.attack.spec);
  out << YAML::Key << "random_init" << YAML::Value << t.attack.random_init;
  out << YAML::Key << "step_size" << YAML::Value << format_step(t.attack.step);
  out << YAML::EndMap;
  out << YAML::Key << "universal" << YAML::Value << YAML::BeginMap;
  emit_pyramid(out, t.universal.spec);
  out << YAML::Key << "step_size" << YAML::Value << format_step(t.universal.step);
  out << YAML::EndMap;
  out << YAML::Key << "schedule" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "enabled" << YAML::Value << t.schedule.enabled;
  out << YAML::Key << "end_ratio" << YAML::Value << format_real(t.schedule.end_ratio);
  out << YAML::Key << "e_start" << YAML::Value << t.schedule.e_start;
  out << YAML::Key << "e_end" << YAML::Value << t.schedule.e_end;
  out << YAML::EndMap;
  out << YAML::EndMap;

  const EvalConfig& e = c.eval;
  out << YAML::Key << "eval" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "landscape_grid" << YAML::Value << e.landscape_grid;
  out << YAML::Key << "landscape_span" << YAML::Value << format_real(e.landscape_span);
  out << YAML::Key << "landscape_samples" << YAML::Value << e.landscape_samples;
  out << YAML::Key << "corruptions" << YAML::Value << YAML::Flow << e.corruptions;
  out << YAML::Key << "max_severity" << YAML::Value << e.max_severity;
  out << YAML::EndMap;

  out << YAML::Key << "ablate" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "pat_steps" << YAML::Value << YAML::Flow << c.ablate.pat_steps;
  out << YAML::Key << "radii" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double r : c.ablate.radii) out << format_radius(r);
  out << YAML::EndSeq;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << c.ablate.seeds;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
  if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  for (const auto& [key, value] : overrides) {
    try {
      set_path(root, key, value);
    } catch (const YAML::Exception& e) {
      throw ConfigError("override '" + key + "': " + e.what());
    }
  }
  return from_tree(root);
}

ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::pair<std::string, std::string> split_override(std::string_view text) {
  const std::size_t eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value, got '" + std::string(text) + "'");
  }
  return {std::string(trim(text.substr(0, eq))), std::string(text.substr(eq + 1))};
}

std::string config_hash(const ExperimentConfig& c) {
  ExperimentConfig blank = c;
  blank.run_id.clear();
  blank.output_dir = "-";
  return sha256_hex(serialize_config(blank));
}

std::string run_name(const ExperimentConfig& c) {
  if (!c.run_id.empty()) return c.run_id;
  return std::string(method_name(c.train.method)) + "-" + config_hash(c).substr(0, 12) + "-s" +
         std::to_string(c.train.seed);
}

}  // namespace upat
