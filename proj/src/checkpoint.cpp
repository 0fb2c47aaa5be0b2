// Copyright 2026 The UPAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "upat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "upat/errors.hpp"

namespace upat {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'U', 'P', 'A', 'T', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("checkpoint: truncated file");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

struct ArrayWriter {
  nlohmann::json index = nlohmann::json::array();
  std::vector<double> payload;

  void add(const std::string& name, const std::vector<int>& shape, std::span<const double> values) {
    index.push_back({{"name", name}, {"shape", shape}, {"offset", payload.size()}, {"count", values.size()}});
    payload.insert(payload.end(), values.begin(), values.end());
  }
};

class ArrayReader {
 public:
  ArrayReader(const nlohmann::json& index, std::span<const double> payload) : payload_(payload) {
    for (const auto& e : index) entries_[e.at("name").get<std::string>()] = e;
  }

  std::span<const double> get(const std::string& name, std::size_t expected) const {
    const auto it = entries_.find(name);
    if (it == entries_.end()) throw DataError("checkpoint: missing array '" + name + "'");
    const auto offset = it->second.at("offset").get<std::size_t>();
    const auto count = it->second.at("count").get<std::size_t>();
    if (count != expected) {
      throw DataError("checkpoint: array '" + name + "' has " + std::to_string(count) + " values, expected " +
                      std::to_string(expected));
    }
    if (offset + count > payload_.size()) throw DataError("checkpoint: array '" + name + "' exceeds payload");
    return payload_.subspan(offset, count);
  }

 private:
  std::map<std::string, nlohmann::json> entries_;
  std::span<const double> payload_;
};

nlohmann::json spec_json(const PyramidSpec& s) {
  return {{"scales", s.scales},
          {"multipliers", s.multipliers},
          {"radius", s.radius},
          {"step_size", s.step_size},
          {"per_channel", s.per_channel}};
}

PyramidSpec spec_from_json(const nlohmann::json& j) {
  PyramidSpec s;
  s.scales = j.at("scales").get<std::vector<int>>();
  s.multipliers = j.at("multipliers").get<std::vector<double>>();
  s.radius = j.at("radius").get<double>();
  s.step_size = j.at("step_size").get<double>();
  s.per_channel = j.at("per_channel").get<bool>();
  return s;
}

}  // namespace

std::string encode_checkpoint(const TrainingState& st, const std::string& method, const std::string& config_yaml) {
  if (!st.model) throw std::invalid_argument("encode_checkpoint: state has no model");
  ArrayWriter arrays;
  const ParameterSet& params = st.model->parameters();
  for (const ParamSlot& slot : params.slots()) arrays.add(slot.name, slot.shape, params.view(slot));
  const int n = static_cast<int>(params.size());
  arrays.add("optimizer.first_moment", {n}, st.optimizer.first_moment());
  arrays.add("optimizer.second_moment", {n}, st.optimizer.second_moment());

  nlohmann::json universal = nullptr;
  if (st.universal) {
    const PyramidPerturbation& p = *st.universal;
    for (std::size_t i = 0; i < p.levels().size(); ++i) {
      const LevelGrid& g = p.level(i);
      arrays.add(level_name(p.spec().scales[i]), {g.rows, g.cols, g.depth}, g.values);
    }
    const ImageShape t = p.target_shape();
    universal = {{"spec", spec_json(p.spec())}, {"target", {t.height, t.width, t.channels}}};
  }

  std::ostringstream rng;
  rng << st.rng;
  const OptimizerConfig& oc = st.optimizer.config();
  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : st.history) history.push_back(to_json(r));

  const nlohmann::json header = {
      {"format_version", kCheckpointVersion},
      {"method", method},
      {"architecture", st.model->architecture()},
      {"next_epoch", st.next_epoch},
      {"global_step", st.global_step},
      {"ledger",
       {{"generation_half_units", st.ledger.generation_half_},
        {"training_forward_half_units", st.ledger.train_forward_half_},
        {"training_backward_half_units", st.ledger.train_backward_half_}}},
      {"cumulative_units", st.ledger.total_units()},
      {"optimizer",
       {{"lr", oc.lr},
        {"weight_decay", oc.weight_decay},
        {"beta1", oc.beta1},
        {"beta2", oc.beta2},
        {"eps", oc.eps},
        {"warmup_epochs", oc.warmup_epochs},
        {"steps_taken", st.optimizer.steps_taken()}}},
      {"universal", universal},
      {"rng", rng.str()},
      {"history", history},
      {"config", config_yaml},
      {"arrays", arrays.index}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  const std::size_t at = out.size();
  out.resize(at + arrays.payload.size() * sizeof(double));
  std::memcpy(out.data() + at, arrays.payload.data(), arrays.payload.size() * sizeof(double));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: not a checkpoint file (bad magic)");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_size = take<std::uint64_t>(bytes, pos);
  if (pos + header_size > bytes.size()) throw DataError("checkpoint: truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(pos, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  }
  pos += header_size;
  const std::size_t payload_bytes = bytes.size() - pos;
  if (payload_bytes % sizeof(double) != 0) throw DataError("checkpoint: payload is not a whole number of doubles");
  std::vector<double> payload(payload_bytes / sizeof(double));
  std::memcpy(payload.data(), bytes.data() + pos, payload_bytes);

  Checkpoint c;
  try {
    if (h.at("format_version").get<std::uint32_t>() != kCheckpointVersion) {
      throw DataError("checkpoint: header version disagrees with file version");
    }
    const ArrayReader arrays(h.at("arrays"), payload);
    TrainingState& st = c.state;
    st.model = make_classifier(h.at("architecture"), 0);
    ParameterSet& params = st.model->parameters();
    for (const ParamSlot& slot : params.slots()) {
      const auto v = arrays.get(slot.name, slot.size);
      std::copy(v.begin(), v.end(), params.view(slot).begin());
    }
    const auto& o = h.at("optimizer");
    OptimizerConfig oc;
    oc.lr = o.at("lr").get<double>();
    oc.weight_decay = o.at("weight_decay").get<double>();
    oc.beta1 = o.at("beta1").get<double>();
    oc.beta2 = o.at("beta2").get<double>();
    oc.eps = o.at("eps").get<double>();
    oc.warmup_epochs = o.at("warmup_epochs").get<int>();
    st.optimizer = AdamW(oc, params.size());
    const auto m = arrays.get("optimizer.first_moment", params.size());
    const auto v = arrays.get("optimizer.second_moment", params.size());
    std::copy(m.begin(), m.end(), st.optimizer.first_moment().begin());
    std::copy(v.begin(), v.end(), st.optimizer.second_moment().begin());
    st.optimizer.set_steps_taken(o.at("steps_taken").get<std::int64_t>());

    if (!h.at("universal").is_null()) {
      const auto& u = h.at("universal");
      const PyramidSpec spec = spec_from_json(u.at("spec"));
      const auto t = u.at("target").get<std::vector<int>>();
      if (t.size() != 3) throw DataError("checkpoint: universal target shape must have 3 entries");
      const ImageShape target{t[0], t[1], t[2]};
      std::vector<LevelGrid> levels;
      for (int s : spec.scales) {
        LevelGrid g = empty_level(s, target, spec.per_channel);
        const auto vals = arrays.get(level_name(s), g.values.size());
        std::copy(vals.begin(), vals.end(), g.values.begin());
        levels.push_back(std::move(g));
      }
      st.universal = PyramidPerturbation(spec, target, std::move(levels));
    }

    std::istringstream rng(h.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw DataError("checkpoint: malformed RNG state");
    st.next_epoch = h.at("next_epoch").get<int>();
    st.global_step = h.at("global_step").get<std::int64_t>();
    const auto& l = h.at("ledger");
    st.ledger.generation_half_ = l.at("generation_half_units").get<std::int64_t>();
    st.ledger.train_forward_half_ = l.at("training_forward_half_units").get<std::int64_t>();
    st.ledger.train_backward_half_ = l.at("training_backward_half_units").get<std::int64_t>();
    for (const auto& r : h.at("history")) st.history.push_back(epoch_record_from_json(r));
    c.method = h.at("method").get<std::string>();
    c.config_yaml = h.at("config").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::string& path, const TrainingState& state, const std::string& method,
                     const std::string& config_yaml) {
  const std::string bytes = encode_checkpoint(state, method, config_yaml);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace upat
