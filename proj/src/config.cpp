#include "pointlm/config.hpp"

#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "pointlm/rng.hpp"

namespace pointlm {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& path,
                       const std::string& what) {
  throw config_error(origin + ": " + path + ": " + what);
}

void check_keys(const json& j, const std::string& origin,
                const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) fail(origin, path.empty() ? "/" : path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) fail(origin, path + "/" + key, "unknown key");
  }
}

template <typename T>
const char* type_word();
template <>
const char* type_word<int>() {
  return "an integer";
}
template <>
const char* type_word<double>() {
  return "a number";
}
template <>
const char* type_word<bool>() {
  return "a boolean";
}
template <>
const char* type_word<std::string>() {
  return "a string";
}
template <>
const char* type_word<std::uint64_t>() {
  return "a non-negative integer";
}

template <typename T>
bool type_ok(const json& v);
template <>
bool type_ok<int>(const json& v) {
  return v.is_number_integer();
}
template <>
bool type_ok<double>(const json& v) {
  return v.is_number();
}
template <>
bool type_ok<bool>(const json& v) {
  return v.is_boolean();
}
template <>
bool type_ok<std::string>(const json& v) {
  return v.is_string();
}
template <>
bool type_ok<std::uint64_t>(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
}

template <typename T>
void read(const json& j, const std::string& origin, const std::string& path,
          const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!type_ok<T>(v))
    fail(origin, path + "/" + key, std::string("expected ") + type_word<T>());
  out = v.get<T>();
}

void read_stage(const json& j, const std::string& origin,
                const std::string& path, StageParams& s, bool has_freeze,
                bool has_sampling) {
  std::set<std::string> keys = {"epochs", "batch_size", "base_lr",
                                "warmup_ratio"};
  if (has_freeze) keys.insert("trainable_layers");
  if (has_sampling) {
    keys.insert("temperature");
    keys.insert("max_new_tokens");
  }
  check_keys(j, origin, path, keys);
  read(j, origin, path, "epochs", s.epochs);
  read(j, origin, path, "batch_size", s.batch_size);
  read(j, origin, path, "base_lr", s.base_lr);
  read(j, origin, path, "warmup_ratio", s.warmup_ratio);
  if (has_freeze) read(j, origin, path, "trainable_layers", s.trainable_layers);
  if (has_sampling) {
    read(j, origin, path, "temperature", s.temperature);
    read(j, origin, path, "max_new_tokens", s.max_new_tokens);
  }
}

}  // namespace

void StageParams::validate(const std::string& label, int n_layers,
                           bool uses_freeze) const {
  require(epochs >= 1, label + ": epochs must be >= 1");
  require(batch_size >= 1, label + ": batch_size must be >= 1");
  require(base_lr > 0.0, label + ": base_lr must be positive");
  require(warmup_ratio >= 0.0 && warmup_ratio <= 1.0,
          label + ": warmup_ratio outside [0,1]");
  if (uses_freeze)
    require(trainable_layers >= 0 && trainable_layers <= n_layers,
            label + ": trainable_layers outside [0, n_layers]");
  require(temperature > 0.0, label + ": temperature must be positive");
  require(max_new_tokens >= 1, label + ": max_new_tokens must be >= 1");
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.stage1 = StageParams{};
  c.stage1.epochs = 3;
  c.stage1.batch_size = 128;
  c.stage1.base_lr = 4e-4;
  c.stage2 = StageParams{};
  c.stage2.epochs = 3;
  c.stage2.batch_size = 32;
  c.stage2.base_lr = 2e-5;
  c.stage3 = StageParams{};
  c.stage3.epochs = 1;
  c.stage3.batch_size = 8;
  c.stage3.base_lr = 1e-6;
  return c;
}

void RunConfig::validate() const {
  // model.validate() needs a vocabulary size, which only exists once the
  // corpus is built; check everything that is knowable now.
  require(model.tok.n_groups >= 1, "config: geometry/n_groups must be >= 1");
  require(model.tok.group_size >= 1, "config: geometry/group_size must be >= 1");
  require(model.tok.d_group >= 1, "config: tokenizer/d_group must be >= 1");
  require(model.tok.d_model >= 1, "config: tokenizer/d_model must be >= 1");
  require(model.tok.codebook_size >= 1,
          "config: tokenizer/codebook_size must be >= 1");
  require(model.tok.commitment_beta >= 0.0,
          "config: tokenizer/commitment_beta must be >= 0");
  require(model.vq_weight >= 0.0, "config: tokenizer/vq_weight must be >= 0");
  require(model.tok.d_model == model.lm.d_model,
          "config: tokenizer/d_model must equal the lm width");
  require(model.lm.n_layers >= 1, "config: lm/n_layers must be >= 1");
  require(model.lm.n_heads >= 1 &&
              model.lm.d_model % model.lm.n_heads == 0,
          "config: lm/d_model must divide evenly into lm/n_heads");
  require(model.lm.d_ff >= 1, "config: lm/d_ff must be >= 1");
  require(model.lm.max_ctx >= 8, "config: lm/max_ctx too small");
  require(model.tok.n_groups + 5 <= model.lm.max_ctx,
          "config: point tokens alone would overflow lm/max_ctx");
  require(data.train_count > 0 && data.val_count > 0 && data.test_count > 0,
          "config: data counts must be positive");
  require(data.n_points >= kMinCloudPoints, "config: data/n_points must be >= 8");
  require(data.noise >= 0.0, "config: data/noise must be >= 0");
  reward.validate();
  stage1.validate("config: stages/stage1", model.lm.n_layers, true);
  stage2.validate("config: stages/stage2", model.lm.n_layers, false);
  stage3.validate("config: stages/stage3", model.lm.n_layers, false);
}

RunConfig parse_run_config(const std::string& json_text,
                           const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw config_error(origin + ": not valid JSON: " + e.what());
  }

  RunConfig c = RunConfig::defaults();
  check_keys(j, origin, "",
             {"seed", "geometry", "tokenizer", "lm", "data", "reward",
              "stages"});
  read(j, origin, "", "seed", c.seed);

  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    check_keys(g, origin, "/geometry", {"n_groups", "group_size"});
    read(g, origin, "/geometry", "n_groups", c.model.tok.n_groups);
    read(g, origin, "/geometry", "group_size", c.model.tok.group_size);
  }
  if (j.contains("tokenizer")) {
    const json& t = j["tokenizer"];
    check_keys(t, origin, "/tokenizer",
               {"codebook_size", "d_group", "d_model", "commitment_beta",
                "vq_weight", "pooling", "continuous"});
    read(t, origin, "/tokenizer", "codebook_size", c.model.tok.codebook_size);
    read(t, origin, "/tokenizer", "d_group", c.model.tok.d_group);
    read(t, origin, "/tokenizer", "d_model", c.model.tok.d_model);
    c.model.lm.d_model = c.model.tok.d_model;
    read(t, origin, "/tokenizer", "commitment_beta",
         c.model.tok.commitment_beta);
    read(t, origin, "/tokenizer", "vq_weight", c.model.vq_weight);
    if (t.contains("pooling")) {
      std::string p;
      read(t, origin, "/tokenizer", "pooling", p);
      try {
        c.model.tok.pooling = pooling_from_string(p);
      } catch (const config_error& e) {
        fail(origin, "/tokenizer/pooling", e.what());
      }
    }
    bool continuous = !c.model.tok.quantize;
    read(t, origin, "/tokenizer", "continuous", continuous);
    c.model.tok.quantize = !continuous;
  }
  if (j.contains("lm")) {
    const json& l = j["lm"];
    check_keys(l, origin, "/lm", {"n_layers", "n_heads", "d_ff", "max_ctx"});
    read(l, origin, "/lm", "n_layers", c.model.lm.n_layers);
    read(l, origin, "/lm", "n_heads", c.model.lm.n_heads);
    read(l, origin, "/lm", "d_ff", c.model.lm.d_ff);
    read(l, origin, "/lm", "max_ctx", c.model.lm.max_ctx);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, origin, "/data",
               {"train_count", "val_count", "test_count", "n_points", "noise",
                "inline_clouds"});
    read(d, origin, "/data", "train_count", c.data.train_count);
    read(d, origin, "/data", "val_count", c.data.val_count);
    read(d, origin, "/data", "test_count", c.data.test_count);
    read(d, origin, "/data", "n_points", c.data.n_points);
    read(d, origin, "/data", "noise", c.data.noise);
    read(d, origin, "/data", "inline_clouds", c.data.inline_clouds);
  }
  if (j.contains("reward")) {
    const json& r = j["reward"];
    check_keys(r, origin, "/reward",
               {"alpha", "sigma", "group_size", "epsilon"});
    read(r, origin, "/reward", "alpha", c.reward.alpha);
    read(r, origin, "/reward", "sigma", c.reward.sigma);
    read(r, origin, "/reward", "group_size", c.reward.group_size);
    read(r, origin, "/reward", "epsilon", c.reward.adv_eps);
  }
  if (j.contains("stages")) {
    const json& s = j["stages"];
    check_keys(s, origin, "/stages", {"stage1", "stage2", "stage3"});
    if (s.contains("stage1"))
      read_stage(s["stage1"], origin, "/stages/stage1", c.stage1, true, false);
    if (s.contains("stage2"))
      read_stage(s["stage2"], origin, "/stages/stage2", c.stage2, false,
                 false);
    if (s.contains("stage3"))
      read_stage(s["stage3"], origin, "/stages/stage3", c.stage3, false, true);
  }

  // one seed knob: the corpus stream is derived, never set directly
  c.data.seed = derive_seed(c.seed, "data");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str(), path);
}

std::string run_config_snapshot(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["geometry"]["n_groups"] = cfg.model.tok.n_groups;
  j["geometry"]["group_size"] = cfg.model.tok.group_size;
  j["tokenizer"]["codebook_size"] = cfg.model.tok.codebook_size;
  j["tokenizer"]["d_group"] = cfg.model.tok.d_group;
  j["tokenizer"]["d_model"] = cfg.model.tok.d_model;
  j["tokenizer"]["commitment_beta"] = cfg.model.tok.commitment_beta;
  j["tokenizer"]["vq_weight"] = cfg.model.vq_weight;
  j["tokenizer"]["pooling"] = to_string(cfg.model.tok.pooling);
  j["tokenizer"]["continuous"] = !cfg.model.tok.quantize;
  j["lm"]["n_layers"] = cfg.model.lm.n_layers;
  j["lm"]["n_heads"] = cfg.model.lm.n_heads;
  j["lm"]["d_ff"] = cfg.model.lm.d_ff;
  j["lm"]["max_ctx"] = cfg.model.lm.max_ctx;
  j["data"]["train_count"] = cfg.data.train_count;
  j["data"]["val_count"] = cfg.data.val_count;
  j["data"]["test_count"] = cfg.data.test_count;
  j["data"]["n_points"] = cfg.data.n_points;
  j["data"]["noise"] = cfg.data.noise;
  j["data"]["inline_clouds"] = cfg.data.inline_clouds;
  j["reward"]["alpha"] = cfg.reward.alpha;
  j["reward"]["sigma"] = cfg.reward.sigma;
  j["reward"]["group_size"] = cfg.reward.group_size;
  j["reward"]["epsilon"] = cfg.reward.adv_eps;
  auto stage = [](const StageParams& s, bool freeze, bool sampling) {
    json o;
    o["epochs"] = s.epochs;
    o["batch_size"] = s.batch_size;
    o["base_lr"] = s.base_lr;
    o["warmup_ratio"] = s.warmup_ratio;
    if (freeze) o["trainable_layers"] = s.trainable_layers;
    if (sampling) {
      o["temperature"] = s.temperature;
      o["max_new_tokens"] = s.max_new_tokens;
    }
    return o;
  };
  j["stages"]["stage1"] = stage(cfg.stage1, true, false);
  j["stages"]["stage2"] = stage(cfg.stage2, false, false);
  j["stages"]["stage3"] = stage(cfg.stage3, false, true);
  return j.dump(2);
}

}  // namespace pointlm
