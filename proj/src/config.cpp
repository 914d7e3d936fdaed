#include "stereovol/config.hpp"

#include "stereovol/error.hpp"

#include <set>

namespace stereovol {

namespace {

template<typename T>
void read_key(const Json& j, const char* key, T& out)
{
  if (!j.contains(key)) {
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' has the wrong type");
  }
}

// Integers must be JSON integers, not floats that happen to be whole.
void read_int(const Json& j, const char* key, int& out)
{
  if (j.contains(key) && !j.at(key).is_number_integer()) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' must be an integer");
  }
  read_key(j, key, out);
}

void read_number(const Json& j, const char* key, double& out)
{
  if (j.contains(key) && !j.at(key).is_number()) {
    throw Error(ErrorCode::InvalidConfig, std::string("config key '") + key + "' must be a number");
  }
  read_key(j, key, out);
}

const std::set<std::string>& train_keys()
{
  static const std::set<std::string> keys = {
      "epochs",         "batch_size",        "learning_rate",     "adam_beta1",     "adam_beta2",
      "adam_epsilon",   "lambda_mse",        "mu_ce",             "seed",           "projection_dim",
      "classifier_hidden", "regression_hidden", "teacher_forcing", "standardize_targets", "fusion_inputs",
      "n_images",       "template_id",       "volume_decimals",   "deterministic"};
  return keys;
}

} // namespace

Json train_config_to_json(const TrainConfig& c)
{
  Json j;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["lambda_mse"] = c.lambda_mse;
  j["mu_ce"] = c.mu_ce;
  j["seed"] = c.seed;
  j["projection_dim"] = c.projection_dim;
  j["classifier_hidden"] = c.classifier_hidden;
  j["regression_hidden"] = c.regression_hidden;
  j["teacher_forcing"] = c.teacher_forcing;
  j["standardize_targets"] = c.standardize_targets;
  j["fusion_inputs"] = to_string(c.fusion_inputs);
  j["n_images"] = c.n_images;
  j["template_id"] = c.template_id;
  j["volume_decimals"] = c.volume_decimals;
  j["deterministic"] = c.deterministic;
  return j;
}

TrainConfig train_config_from_json(const Json& j)
{
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidConfig, "train config must be a JSON object");
  }
  TrainConfig c;
  read_int(j, "epochs", c.epochs);
  read_int(j, "batch_size", c.batch_size);
  read_number(j, "learning_rate", c.learning_rate);
  read_number(j, "adam_beta1", c.adam_beta1);
  read_number(j, "adam_beta2", c.adam_beta2);
  read_number(j, "adam_epsilon", c.adam_epsilon);
  read_number(j, "lambda_mse", c.lambda_mse);
  read_number(j, "mu_ce", c.mu_ce);
  if (j.contains("seed") && !j.at("seed").is_number_unsigned()) {
    throw Error(ErrorCode::InvalidConfig, "config key 'seed' must be a non-negative integer");
  }
  read_key(j, "seed", c.seed);
  read_int(j, "projection_dim", c.projection_dim);
  read_int(j, "classifier_hidden", c.classifier_hidden);
  read_int(j, "regression_hidden", c.regression_hidden);
  read_number(j, "teacher_forcing", c.teacher_forcing);
  read_key(j, "standardize_targets", c.standardize_targets);
  if (j.contains("fusion_inputs")) {
    std::string s;
    read_key(j, "fusion_inputs", s);
    c.fusion_inputs = fusion_inputs_from_string(s);
  }
  read_int(j, "n_images", c.n_images);
  read_int(j, "template_id", c.template_id);
  read_int(j, "volume_decimals", c.volume_decimals);
  read_key(j, "deterministic", c.deterministic);
  c.validate();
  return c;
}

Json encoder_spec_to_json(const EncoderSpec& spec)
{
  return Json{{"name", spec.name}, {"dim", spec.dim}, {"seed", spec.seed}};
}

EncoderSpec encoder_spec_from_json(const Json& j)
{
  EncoderSpec s;
  s.name = j.at("name").get<std::string>();
  s.dim = j.at("dim").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

void GlobalConfig::validate() const
{
  train.validate();
  if (image_encoder.name.empty() || text_encoder.name.empty()) {
    throw Error(ErrorCode::InvalidConfig, "encoder names must be set");
  }
  if (image_encoder.dim < 1 || text_encoder.dim < 1) {
    throw Error(ErrorCode::InvalidConfig, "encoder dims must be positive");
  }
  static const std::set<std::string> levels = {"quiet", "info", "debug"};
  if (!levels.count(log_level)) {
    throw Error(ErrorCode::InvalidConfig, "log_level must be quiet, info or debug");
  }
}

GlobalConfig global_config_from_json(const Json& j)
{
  if (!j.is_object()) {
    throw Error(ErrorCode::InvalidConfig, "config must be a flat JSON object");
  }
  static const std::set<std::string> extra = {
      "image_encoder.name", "image_encoder.dim", "image_encoder.seed", "text_encoder.name", "text_encoder.dim",
      "text_encoder.seed",  "paths.data_root",   "paths.cache_dir",    "paths.output_dir",  "priors_file",
      "log_level"};
  for (const auto& [key, value] : j.items()) {
    if (!train_keys().count(key) && !extra.count(key)) {
      throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
    }
    if (value.is_object() || value.is_array()) {
      throw Error(ErrorCode::InvalidConfig, "config key '" + key + "' must be a scalar");
    }
  }
  GlobalConfig g;
  g.train = train_config_from_json(j);
  read_key(j, "image_encoder.name", g.image_encoder.name);
  read_int(j, "image_encoder.dim", g.image_encoder.dim);
  read_key(j, "image_encoder.seed", g.image_encoder.seed);
  read_key(j, "text_encoder.name", g.text_encoder.name);
  read_int(j, "text_encoder.dim", g.text_encoder.dim);
  read_key(j, "text_encoder.seed", g.text_encoder.seed);
  auto read_path = [&](const char* key, std::optional<std::filesystem::path>& out) {
    if (j.contains(key)) {
      std::string s;
      read_key(j, key, s);
      out = s;
    }
  };
  read_path("paths.data_root", g.data_root);
  read_path("paths.cache_dir", g.cache_dir);
  read_path("paths.output_dir", g.output_dir);
  read_path("priors_file", g.priors_file);
  read_key(j, "log_level", g.log_level);
  g.validate();
  return g;
}

Json global_config_to_json(const GlobalConfig& g)
{
  Json j = train_config_to_json(g.train);
  j["image_encoder.name"] = g.image_encoder.name;
  j["image_encoder.dim"] = g.image_encoder.dim;
  j["image_encoder.seed"] = g.image_encoder.seed;
  j["text_encoder.name"] = g.text_encoder.name;
  j["text_encoder.dim"] = g.text_encoder.dim;
  j["text_encoder.seed"] = g.text_encoder.seed;
  if (g.data_root) j["paths.data_root"] = g.data_root->string();
  if (g.cache_dir) j["paths.cache_dir"] = g.cache_dir->string();
  if (g.output_dir) j["paths.output_dir"] = g.output_dir->string();
  if (g.priors_file) j["priors_file"] = g.priors_file->string();
  j["log_level"] = g.log_level;
  return j;
}

GlobalConfig read_global_config(const std::filesystem::path& path)
{
  return global_config_from_json(read_json_file(path));
}

std::string config_schema_help()
{
  return R"(Config file: one flat JSON object. Unknown keys are rejected.

  epochs              int     100     training epochs
  batch_size          int     64
  learning_rate       number  0.001   Adam step size
  adam_beta1          number  0.9
  adam_beta2          number  0.999
  adam_epsilon        number  1e-8
  lambda_mse          number  1.0     weight of the volume MSE loss
  mu_ce               number  0.5     weight of the classification loss
  seed                uint    0
  projection_dim      int     512     width of the fused representation
  classifier_hidden   int     0       0 = single affine classifier
  regression_hidden   int     0       0 = projection_dim / 2
  teacher_forcing     number  0.0     probability of using the true class for the prompt
  standardize_targets bool    false   regress (v - mean) / std instead of raw mL
  fusion_inputs       string  full    full | stereo_only | text_only
  n_images            int     2       views concatenated into the stereo feature
  template_id         int     5       prompt template 0..5
  volume_decimals     int     1       digits of the prior volume in prompts
  deterministic       bool    true
  image_encoder.name  string  hash-image
  image_encoder.dim   int     64
  image_encoder.seed  uint    0
  text_encoder.name   string  hash-text
  text_encoder.dim    int     64
  text_encoder.seed   uint    1
  paths.data_root     string          base for relative manifest paths
  paths.cache_dir     string          directory of <encoder>.jsonl embedding stores
  paths.output_dir    string
  priors_file         string          external prior table (source "external")
  log_level           string  info    quiet | info | debug
)";
}

} // namespace stereovol
