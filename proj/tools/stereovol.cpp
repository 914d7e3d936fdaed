#include "stereovol/checkpoint.hpp"
#include "stereovol/config.hpp"
#include "stereovol/error.hpp"
#include "stereovol/evaluation.hpp"
#include "stereovol/ingestion.hpp"
#include "stereovol/io.hpp"
#include "stereovol/mesh.hpp"
#include "stereovol/nutrition.hpp"
#include "stereovol/pipeline.hpp"
#include "stereovol/report.hpp"
#include "stereovol/synthetic.hpp"
#include "stereovol/training.hpp"
#include "stereovol/vlm.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <set>

namespace fs = std::filesystem;
using namespace stereovol;

namespace {

enum class LogLevel { Quiet, Info, Debug };
LogLevel g_log = LogLevel::Info;

void log_info(const std::string& msg)
{
  if (g_log != LogLevel::Quiet) {
    std::cerr << "[info] " << msg << '\n';
  }
}

void log_debug(const std::string& msg)
{
  if (g_log == LogLevel::Debug) {
    std::cerr << "[debug] " << msg << '\n';
  }
}

std::string_view family_name(ErrorFamily f)
{
  switch (f) {
  case ErrorFamily::Config:
    return "config";
  case ErrorFamily::Data:
    return "data";
  case ErrorFamily::Model:
    return "model";
  case ErrorFamily::Numerical:
    return "numerical";
  case ErrorFamily::External:
    return "external";
  case ErrorFamily::Io:
    return "io";
  }
  return "io";
}

// Options shared by commands that load a config file.
struct Common {
  std::string config;
  std::string cache_dir;
  std::string data_root;
  std::string log_level;
};

void add_common(CLI::App* cmd, Common& c)
{
  cmd->add_option("--config", c.config, "Flat JSON config file (see `stereovol config-help`)")->check(CLI::ExistingFile);
  cmd->add_option("--cache-dir", c.cache_dir, "Directory of <encoder>.jsonl embedding stores");
  cmd->add_option("--data-root", c.data_root, "Base directory for relative image paths in manifests");
  cmd->add_option("--log-level", c.log_level, "quiet | info | debug");
}

GlobalConfig resolve_config(const Common& c)
{
  GlobalConfig g = c.config.empty() ? GlobalConfig{} : read_global_config(c.config);
  if (!c.cache_dir.empty()) {
    g.cache_dir = c.cache_dir;
  }
  if (!c.data_root.empty()) {
    g.data_root = c.data_root;
  }
  if (!c.log_level.empty()) {
    g.log_level = c.log_level;
  }
  g.validate();
  g_log = g.log_level == "quiet" ? LogLevel::Quiet : g.log_level == "debug" ? LogLevel::Debug : LogLevel::Info;
  return g;
}

std::vector<StereoSample> load_manifest(const std::string& path, const GlobalConfig& g)
{
  auto samples = read_manifest(path, g.data_root);
  log_info("read " + std::to_string(samples.size()) + " records from " + path);
  return samples;
}

ClassVocabulary vocab_from_samples(std::span<const StereoSample> samples)
{
  std::set<std::string> names;
  for (const auto& s : samples) {
    names.insert(s.class_label);
  }
  return ClassVocabulary(std::vector<std::string>(names.begin(), names.end()));
}

// Every command leaves a record of what it ran on next to its output.
void write_run_record(const fs::path& path, const std::string& command, const Json& inputs, Json extra = Json::object())
{
  Json j;
  j["command"] = command;
  j["inputs"] = inputs;
  for (auto& [k, v] : extra.items()) {
    j[k] = v;
  }
  write_json_file(path, j);
}

Json file_digest(const std::string& path)
{
  return Json{{"path", path}, {"sha256", sha256_file(path)}};
}

fs::path sidecar(const fs::path& out)
{
  return fs::path(out.string() + ".run.json");
}

// ingest ---------------------------------------------------------------------

struct IngestArgs {
  Common common;
  std::string sequences;
  std::string out;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int max_pairs = 8;
  int min_gap = 1;
  int n_views = 2;
  double mesh_scale = 1.0;
};

int run_ingest(const IngestArgs& a)
{
  resolve_config(a.common);
  auto sequences = read_sequences(a.sequences);
  for (auto& seq : sequences) {
    if (!seq.volume_ml && seq.mesh) {
      seq.volume_ml = mesh_volume_ml(load_obj(*seq.mesh), a.mesh_scale);
      log_debug(seq.item_id + ": mesh volume " + format_volume(*seq.volume_ml, 3) + " mL");
    }
  }
  const SplitPolicy policy{a.train_fraction, a.seed, a.max_pairs, a.min_gap, a.n_views};
  const ManifestSplit split = build_manifest(sequences, policy);
  std::set<std::string> names;
  for (const auto& s : sequences) {
    names.insert(s.class_label);
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  write_manifest(out / "train.jsonl", split.train);
  write_manifest(out / "test.jsonl", split.test);
  write_vocabulary(out / "vocab.txt", ClassVocabulary(std::vector<std::string>(names.begin(), names.end())));
  write_run_record(out / "run_manifest.json", "ingest", Json{{"sequences", file_digest(a.sequences)}},
                   Json{{"train_fraction", a.train_fraction},
                        {"seed", a.seed},
                        {"max_pairs", a.max_pairs},
                        {"min_gap", a.min_gap},
                        {"n_views", a.n_views},
                        {"mesh_scale_to_cm", a.mesh_scale},
                        {"train_records", split.train.size()},
                        {"test_records", split.test.size()}});
  log_info("wrote " + std::to_string(split.train.size()) + " train and " + std::to_string(split.test.size()) +
           " test records to " + out.string());
  return 0;
}

// build-priors -----------------------------------------------------------------

struct PriorsArgs {
  Common common;
  std::string train_manifest;
  std::string vocab;
  std::string out;
};

int run_build_priors(const PriorsArgs& a)
{
  const GlobalConfig g = resolve_config(a.common);
  const auto train = load_manifest(a.train_manifest, g);
  const ClassVocabulary vocab = a.vocab.empty() ? vocab_from_samples(train) : read_vocabulary(a.vocab);
  const VolumePriorTable table = build_prior_table(train, vocab);
  write_prior_table(a.out, table);
  write_run_record(sidecar(a.out), "build-priors", Json{{"train_manifest", file_digest(a.train_manifest)}});
  log_info("wrote priors for " + std::to_string(table.entries.size()) + " classes to " + a.out);
  return 0;
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string train_manifest;
  std::string out;
  std::string vocab;
  std::string priors;
  bool deterministic = false;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::uint64_t> seed;
  std::optional<int> template_id;
  std::optional<int> n_images;
  std::optional<int> projection_dim;
  std::string fusion_inputs;
  bool standardize = false;
};

void add_train_overrides(CLI::App* cmd, TrainArgs& a)
{
  cmd->add_option("--epochs", a.epochs);
  cmd->add_option("--batch-size", a.batch_size);
  cmd->add_option("--lr", a.learning_rate, "Adam learning rate");
  cmd->add_option("--seed", a.seed);
  cmd->add_option("--template", a.template_id, "Prompt template id 0..5");
  cmd->add_option("--n-images", a.n_images, "Views per item fed to the model");
  cmd->add_option("--projection-dim", a.projection_dim);
  cmd->add_option("--fusion-inputs", a.fusion_inputs, "full | stereo_only | text_only");
  cmd->add_flag("--standardize-targets", a.standardize, "Regress standardized volumes");
  cmd->add_flag("--deterministic", a.deterministic, "Force the determinism flag on");
}

TrainConfig apply_overrides(TrainConfig c, const TrainArgs& a)
{
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.learning_rate) c.learning_rate = *a.learning_rate;
  if (a.seed) c.seed = *a.seed;
  if (a.template_id) c.template_id = *a.template_id;
  if (a.n_images) c.n_images = *a.n_images;
  if (a.projection_dim) c.projection_dim = *a.projection_dim;
  if (!a.fusion_inputs.empty()) c.fusion_inputs = fusion_inputs_from_string(a.fusion_inputs);
  if (a.standardize) c.standardize_targets = true;
  if (a.deterministic) c.deterministic = true;
  c.validate();
  return c;
}

struct PreparedTraining {
  GlobalConfig global;
  TrainConfig config;
  std::vector<StereoSample> train;
  ClassVocabulary vocab;
  VolumePriorTable priors;
  EncoderPair encoders;
  std::map<std::string, std::string> digests;
};

PreparedTraining prepare_training(const TrainArgs& a)
{
  PreparedTraining p;
  p.global = resolve_config(a.common);
  p.config = apply_overrides(p.global.train, a);
  p.train = load_manifest(a.train_manifest, p.global);
  p.vocab = a.vocab.empty() ? vocab_from_samples(p.train) : read_vocabulary(a.vocab);
  p.digests["train_manifest"] = sha256_file(a.train_manifest);
  std::optional<fs::path> priors_file = p.global.priors_file;
  if (!a.priors.empty()) {
    priors_file = a.priors;
  }
  if (priors_file) {
    p.priors = read_prior_table(*priors_file);
    p.digests["priors"] = sha256_file(*priors_file);
  } else {
    p.priors = build_prior_table(p.train, p.vocab);
  }
  p.priors.check_covers(p.vocab);
  p.encoders = make_encoders(p.global.image_encoder, p.global.text_encoder, p.global.cache_dir);
  return p;
}

int run_train(const TrainArgs& a)
{
  PreparedTraining p = prepare_training(a);
  const TrainInputs inputs{p.train, p.vocab, p.priors, *p.encoders.image, *p.encoders.text,
                           p.global.image_encoder, p.global.text_encoder, p.digests};
  const fs::path out(a.out);
  log_info("training on " + std::to_string(p.train.size()) + " records, " + std::to_string(p.vocab.size()) +
           " classes, " + std::to_string(p.config.epochs) + " epochs");
  train_to_directory(p.config, inputs, out, [&](const EpochRecord& e) {
    char line[160];
    std::snprintf(line, sizeof line, "epoch %d  mse %.6g  ce %.6g  total %.6g", e.epoch, e.mse, e.ce, e.total);
    if (e.epoch == 1 || e.epoch == p.config.epochs || e.epoch % 10 == 0) {
      log_info(line);
    } else {
      log_debug(line);
    }
  });
  write_prior_table(out / "priors.json", p.priors);
  write_vocabulary(out / "vocab.txt", p.vocab);
  log_info("wrote checkpoints to " + out.string());
  return 0;
}

// predict --------------------------------------------------------------------

struct PredictArgs {
  Common common;
  std::string checkpoint;
  std::string manifest;
  std::string out;
};

int run_predict(const PredictArgs& a)
{
  const GlobalConfig g = resolve_config(a.common);
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const EncoderPair enc = make_encoders(ckpt.image_encoder, ckpt.text_encoder, g.cache_dir);
  const auto samples = load_manifest(a.manifest, g);
  const PredictionSet preds = predict(ckpt, samples, *enc.image, *enc.text);
  write_predictions(a.out, preds);
  write_run_record(sidecar(a.out), "predict",
                   Json{{"checkpoint", file_digest(a.checkpoint)}, {"manifest", file_digest(a.manifest)}});
  log_info("wrote " + std::to_string(preds.size()) + " predictions to " + a.out);
  return 0;
}

// evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::string predictions;
  std::string out;
  bool no_clip = false;
};

int run_evaluate(const EvaluateArgs& a)
{
  resolve_config(a.common);
  const PredictionSet preds = read_predictions(a.predictions);
  const MetricsOptions opts{!a.no_clip};
  const MetricsReport m = compute_metrics(preds, opts);
  const ErrorDistribution dist = error_distribution_series(preds, opts);
  write_evaluation(a.out, m, dist);
  write_run_record(fs::path(a.out) / "run_manifest.json", "evaluate",
                   Json{{"predictions", file_digest(a.predictions)}}, Json{{"clip_negative", opts.clip_negative}});
  char line[200];
  std::snprintf(line, sizeof line, "MAE %.2f mL  MAPE %.2f%%  r %.3f  R2 %.3f  cos %.3f  (n=%zu, clipped %zu)",
                m.mae_ml, m.mape_percent, m.pearson_r, m.r_squared, m.cosine_similarity, m.n_items, m.n_clipped);
  std::cout << line << '\n';
  return 0;
}

// baseline -------------------------------------------------------------------

struct BaselineArgs {
  Common common;
  std::string kind;
  std::string train_manifest;
  std::string test_manifest;
  std::string priors;
  std::string out;
};

int run_baseline(const BaselineArgs& a)
{
  const GlobalConfig g = resolve_config(a.common);
  const auto test = load_manifest(a.test_manifest, g);
  PredictionSet preds;
  Json inputs{{"test_manifest", file_digest(a.test_manifest)}};
  if (a.kind == "dataset_mean") {
    if (a.train_manifest.empty()) {
      throw Error(ErrorCode::InvalidConfig, "dataset_mean needs --train-manifest");
    }
    const auto train = load_manifest(a.train_manifest, g);
    preds = baseline_dataset_mean(distinct_item_volumes(train), test);
    inputs["train_manifest"] = file_digest(a.train_manifest);
  } else {
    VolumePriorTable priors;
    if (!a.priors.empty()) {
      priors = read_prior_table(a.priors);
      inputs["priors"] = file_digest(a.priors);
    } else if (!a.train_manifest.empty()) {
      const auto train = load_manifest(a.train_manifest, g);
      priors = build_prior_table(train, vocab_from_samples(train));
      inputs["train_manifest"] = file_digest(a.train_manifest);
    } else {
      throw Error(ErrorCode::InvalidConfig, "category_mean needs --priors or --train-manifest");
    }
    preds = baseline_category_mean(priors, test);
  }
  write_predictions(a.out, preds);
  write_run_record(sidecar(a.out), "baseline", inputs, Json{{"kind", a.kind}});
  log_info("wrote " + std::to_string(preds.size()) + " " + a.kind + " predictions to " + a.out);
  return 0;
}

// ablate ---------------------------------------------------------------------

struct AblateArgs {
  TrainArgs train;
  std::string test_manifest;
  std::vector<std::string> variants;
};

int run_ablate(const AblateArgs& a)
{
  PreparedTraining p = prepare_training(a.train);
  const auto test = load_manifest(a.test_manifest, p.global);
  ExperimentData data{p.train, test, p.vocab, p.priors};
  const fs::path out(a.train.out);
  fs::create_directories(out);
  Json summary = Json::object();
  for (const auto& name : a.variants) {
    const AblationVariant v = AblationVariant::parse(name);
    log_info("variant " + name);
    const ExperimentResult r =
        run_ablation(v, p.config, data, p.encoders, p.global.image_encoder, p.global.text_encoder);
    const fs::path dir = out / name;
    fs::create_directories(dir);
    write_predictions(dir / "predictions.jsonl", r.predictions);
    write_json_file(dir / "metrics.json", r.metrics.to_json());
    write_json_file(dir / "run_manifest.json", r.training.manifest.to_json());
    Json entry = r.metrics.to_json();
    const ModelDims dims = make_dims(v.apply(p.config), p.encoders.image->output_dim(),
                                     p.encoders.text->output_dim(), p.vocab.size());
    entry["fusion_head_gflops"] = static_cast<double>(fusion_head_flops(dims)) * 1e-9;
    summary[name] = entry;
    char line[160];
    std::snprintf(line, sizeof line, "%-20s MAE %.2f  MAPE %.2f%%", name.c_str(), r.metrics.mae_ml,
                  r.metrics.mape_percent);
    std::cout << line << '\n';
  }
  write_json_file(out / "ablation.json", summary);
  return 0;
}

// report ---------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string ours;
  std::string out;
};

int run_report(const ReportArgs& a)
{
  std::vector<MethodMetrics> rows;
  Json inputs = Json::array();
  for (const auto& spec : a.metrics) {
    // NAME=PATH, or PATH with the name taken from the parent directory.
    const auto eq = spec.find('=');
    std::string name = eq == std::string::npos ? "" : spec.substr(0, eq);
    const fs::path path = eq == std::string::npos ? fs::path(spec) : fs::path(spec.substr(eq + 1));
    if (name.empty()) {
      name = path.parent_path().filename().string();
      if (name.empty()) {
        name = path.stem().string();
      }
    }
    rows.push_back({name, MetricsReport::from_json(read_json_file(path))});
    inputs.push_back(file_digest(path.string()));
  }
  const ComparisonTable table =
      make_comparison(std::move(rows), a.ours.empty() ? std::nullopt : std::optional<std::string>(a.ours));
  const std::string text = table.render_text();
  std::cout << text;
  if (!a.out.empty()) {
    const fs::path out(a.out);
    fs::create_directories(out);
    write_text_file(out / "table.txt", text);
    write_text_file(out / "table.csv", table.render_csv());
    write_json_file(out / "table.json", table.to_json());
    write_run_record(out / "run_manifest.json", "report", Json{{"metrics", inputs}});
  }
  return 0;
}

// nutrition ------------------------------------------------------------------

struct NutritionArgs {
  std::string predictions;
  std::string db;
  std::string out;
  bool no_clip = false;
};

int run_nutrition(const NutritionArgs& a)
{
  const PredictionSet preds = read_predictions(a.predictions);
  const NutrientDatabase db = read_nutrient_database(a.db);
  const NutritionReport report = nutrition_report(preds, db, !a.no_clip);
  write_json_file(a.out, report.to_json());
  write_run_record(sidecar(a.out), "nutrition",
                   Json{{"predictions", file_digest(a.predictions)}, {"db", file_digest(a.db)}});
  char line[200];
  std::snprintf(line, sizeof line, "volume MAE %.2f mL  energy %.2f kcal  protein %.2f g  carbohydrate %.2f g  fat %.2f g",
                report.volume_mae_ml, report.mae[0], report.mae[1], report.mae[2], report.mae[3]);
  std::cout << line << '\n';
  return 0;
}

// vlm-baseline ---------------------------------------------------------------

struct VlmArgs {
  Common common;
  std::string mode;
  std::string manifest;
  std::string out;
  std::string replay;
  std::string record;
  int concurrency = 4;
  int max_attempts = 4;
  std::optional<double> temperature;
};

int run_vlm(const VlmArgs& a)
{
  const GlobalConfig g = resolve_config(a.common);
  const auto samples = load_manifest(a.manifest, g);
  VlmRunOptions opts;
  opts.mode = vlm_mode_from_string(a.mode);
  opts.concurrency = a.concurrency;
  opts.retry.max_attempts = a.max_attempts;

  std::unique_ptr<ChatTransport> owned;
  ChatTransport* transport = nullptr;
  std::optional<ReplayTransport> replay;
  if (!a.replay.empty()) {
    replay.emplace(ReplayTransport::load(a.replay));
    transport = &*replay;
  } else {
    HttpSettings settings = HttpSettings::from_env();
    settings.temperature = a.temperature;
    owned = make_http_transport(settings);
    transport = owned.get();
  }
  std::optional<RecordingTransport> recorder;
  if (!a.record.empty()) {
    recorder.emplace(*transport);
    transport = &*recorder;
  }
  const VlmRunResult result = run_vlm_baseline(samples, *transport, opts);
  write_predictions(a.out, result.predictions);
  if (recorder) {
    recorder->save(a.record);
  }
  Json manifest = result.manifest(opts, *transport);
  manifest["inputs"] = Json{{"manifest", file_digest(a.manifest)}};
  write_json_file(sidecar(a.out), manifest);
  log_info(std::to_string(result.predictions.size()) + " parsed, " + std::to_string(result.n_missing) +
           " missing, " + std::to_string(result.total_attempts) + " requests");
  return 0;
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SyntheticSpec spec;
};

int run_synth(const SynthArgs& a)
{
  const SyntheticDataset data = make_synthetic(a.spec);
  write_synthetic(data, a.out);
  write_run_record(fs::path(a.out) / "run_manifest.json", "synth", Json::object(),
                   Json{{"classes", a.spec.num_classes},
                        {"items_per_class", a.spec.items_per_class},
                        {"frames_per_item", a.spec.frames_per_item},
                        {"image_size", a.spec.image_size},
                        {"seed", a.spec.seed}});
  log_info("wrote " + std::to_string(data.sequences.size()) + " synthetic sequences to " + a.out);
  return 0;
}

// mesh-volume ----------------------------------------------------------------

struct MeshArgs {
  std::string mesh;
  double scale = 1.0;
};

int run_mesh_volume(const MeshArgs& a)
{
  char line[64];
  std::snprintf(line, sizeof line, "%.6f", mesh_volume_ml(load_obj(a.mesh), a.scale));
  std::cout << line << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Stereo image volume estimation with class-prior text prompts."};
  app.require_subcommand(1);
  std::function<int()> action;

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Split frame sequences into stereo-pair manifests");
  add_common(c_ingest, ingest.common);
  c_ingest->add_option("--sequences", ingest.sequences, "Sequence file (JSON Lines)")->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out, "Output directory")->required();
  c_ingest->add_option("--train-fraction", ingest.train_fraction);
  c_ingest->add_option("--seed", ingest.seed);
  c_ingest->add_option("--max-pairs", ingest.max_pairs, "Training pairs per item");
  c_ingest->add_option("--min-gap", ingest.min_gap, "Pairs skip at least this many frames");
  c_ingest->add_option("--n-views", ingest.n_views, "Views per record (> 2 adds extra frames)");
  c_ingest->add_option("--mesh-scale", ingest.mesh_scale, "Mesh units to cm");
  c_ingest->callback([&] { action = [&] { return run_ingest(ingest); }; });

  PriorsArgs priors;
  auto* c_priors = app.add_subcommand("build-priors", "Per-class mean volumes of a training manifest");
  add_common(c_priors, priors.common);
  c_priors->add_option("--train-manifest", priors.train_manifest)->required()->check(CLI::ExistingFile);
  c_priors->add_option("--vocab", priors.vocab, "Class list, one per line")->check(CLI::ExistingFile);
  c_priors->add_option("--out", priors.out)->required();
  c_priors->callback([&] { action = [&] { return run_build_priors(priors); }; });

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the fusion model");
  add_common(c_train, train.common);
  c_train->add_option("--train-manifest", train.train_manifest)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--vocab", train.vocab)->check(CLI::ExistingFile);
  c_train->add_option("--priors", train.priors, "Prior table; default: train-split means")->check(CLI::ExistingFile);
  add_train_overrides(c_train, train);
  c_train->callback([&] { action = [&] { return run_train(train); }; });

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Predict volumes for a manifest");
  add_common(c_pred, pred.common);
  c_pred->add_option("--checkpoint", pred.checkpoint)->required()->check(CLI::ExistingFile);
  c_pred->add_option("--manifest", pred.manifest)->required()->check(CLI::ExistingFile);
  c_pred->add_option("--out", pred.out, "Prediction file (JSON Lines)")->required();
  c_pred->callback([&] { action = [&] { return run_predict(pred); }; });

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Metrics, CDF and KDE series of a prediction file");
  add_common(c_eval, eval.common);
  c_eval->add_option("--predictions", eval.predictions)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval.out, "Output directory")->required();
  c_eval->add_flag("--no-clip", eval.no_clip, "Score negative estimates as they are");
  c_eval->callback([&] { action = [&] { return run_evaluate(eval); }; });

  BaselineArgs base;
  auto* c_base = app.add_subcommand("baseline", "Dataset-mean or category-mean predictions");
  add_common(c_base, base.common);
  c_base->add_option("--kind", base.kind)->required()->check(CLI::IsMember({"dataset_mean", "category_mean"}));
  c_base->add_option("--train-manifest", base.train_manifest)->check(CLI::ExistingFile);
  c_base->add_option("--test-manifest", base.test_manifest)->required()->check(CLI::ExistingFile);
  c_base->add_option("--priors", base.priors)->check(CLI::ExistingFile);
  c_base->add_option("--out", base.out)->required();
  c_base->callback([&] { action = [&] { return run_baseline(base); }; });

  AblateArgs abl;
  auto* c_abl = app.add_subcommand("ablate", "Train and score configuration variants");
  add_common(c_abl, abl.train.common);
  c_abl->add_option("--train-manifest", abl.train.train_manifest)->required()->check(CLI::ExistingFile);
  c_abl->add_option("--test-manifest", abl.test_manifest)->required()->check(CLI::ExistingFile);
  c_abl->add_option("--out", abl.train.out)->required();
  c_abl->add_option("--vocab", abl.train.vocab)->check(CLI::ExistingFile);
  c_abl->add_option("--priors", abl.train.priors)->check(CLI::ExistingFile);
  c_abl->add_option("--variant", abl.variants,
                    "full | stereo_only | text_only | prompt_template_<k> | n_images_<n> (repeatable)")
      ->required();
  add_train_overrides(c_abl, abl.train);
  c_abl->callback([&] { action = [&] { return run_ablate(abl); }; });

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Comparison table of metrics files");
  c_rep->add_option("--metrics", rep.metrics, "NAME=metrics.json (repeatable)")->required();
  c_rep->add_option("--ours", rep.ours, "Method the improvement row is computed for (default: last)");
  c_rep->add_option("--out", rep.out, "Directory for table.txt/csv/json");
  c_rep->callback([&] { action = [&] { return run_report(rep); }; });

  NutritionArgs nut;
  auto* c_nut = app.add_subcommand("nutrition", "Scale nutrient profiles by predicted volume");
  c_nut->add_option("--predictions", nut.predictions)->required()->check(CLI::ExistingFile);
  c_nut->add_option("--db", nut.db, "Nutrient database (JSON)")->required()->check(CLI::ExistingFile);
  c_nut->add_option("--out", nut.out)->required();
  c_nut->add_flag("--no-clip", nut.no_clip, "Fail on non-positive estimates instead of zeroing them");
  c_nut->callback([&] { action = [&] { return run_nutrition(nut); }; });

  VlmArgs vlm;
  auto* c_vlm = app.add_subcommand(
      "vlm-baseline", "Query a chat-completion model for volumes.\n"
                      "Env: STEREOVOL_VLM_ENDPOINT (full URL), STEREOVOL_VLM_TOKEN, STEREOVOL_VLM_MODEL");
  add_common(c_vlm, vlm.common);
  c_vlm->add_option("--mode", vlm.mode)
      ->required()
      ->check(CLI::IsMember({"single_no_context", "single_with_context", "stereo"}));
  c_vlm->add_option("--manifest", vlm.manifest)->required()->check(CLI::ExistingFile);
  c_vlm->add_option("--out", vlm.out, "Prediction file (JSON Lines)")->required();
  c_vlm->add_option("--replay", vlm.replay, "Answer from a recorded tape instead of the network")
      ->check(CLI::ExistingFile);
  c_vlm->add_option("--record", vlm.record, "Write every exchange to this tape");
  c_vlm->add_option("--concurrency", vlm.concurrency);
  c_vlm->add_option("--max-attempts", vlm.max_attempts);
  c_vlm->add_option("--temperature", vlm.temperature);
  c_vlm->callback([&] { action = [&] { return run_vlm(vlm); }; });

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Write a synthetic multi-view dataset");
  c_syn->add_option("--out", syn.out)->required();
  c_syn->add_option("--classes", syn.spec.num_classes);
  c_syn->add_option("--items", syn.spec.items_per_class, "Items per class");
  c_syn->add_option("--frames", syn.spec.frames_per_item);
  c_syn->add_option("--image-size", syn.spec.image_size);
  c_syn->add_option("--seed", syn.spec.seed);
  c_syn->add_option("--brightness-jitter", syn.spec.brightness_jitter);
  c_syn->add_option("--pixel-noise", syn.spec.pixel_noise);
  c_syn->callback([&] { action = [&] { return run_synth(syn); }; });

  MeshArgs mesh;
  auto* c_mesh = app.add_subcommand("mesh-volume", "Enclosed volume of a closed OBJ mesh, in mL");
  c_mesh->add_option("--mesh", mesh.mesh)->required()->check(CLI::ExistingFile);
  c_mesh->add_option("--scale", mesh.scale, "Mesh units to cm");
  c_mesh->callback([&] { action = [&] { return run_mesh_volume(mesh); }; });

  auto* c_help = app.add_subcommand("config-help", "Describe the config file schema");
  c_help->callback([&] {
    action = [] {
      std::cout << config_schema_help();
      return 0;
    };
  });
  app.footer(config_schema_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code_for(ErrorFamily::Config);
  }
  try {
    return action();
  } catch (const Error& e) {
    const ErrorFamily f = family_of(e.code());
    std::cerr << "error\tfamily=" << family_name(f) << "\tcode=" << to_string(e.code()) << "\tmessage=" << e.what()
              << '\n';
    return exit_code_for(f);
  } catch (const std::exception& e) {
    std::cerr << "error\tfamily=io\tcode=Io\tmessage=" << e.what() << '\n';
    return exit_code_for(ErrorFamily::Io);
  }
}
