#include "ebpr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

namespace ebpr {

std::string version_string() { return EBPR_VERSION; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value '" + text + "' for " + key);
  return value;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid value '" + text + "' for " + key);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("invalid value '" + text + "' for " + key + " (expected true or false)");
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& t : split_list(text)) out.push_back(parse_number<std::size_t>(key, t));
  if (out.empty()) throw ConfigError(key + " needs at least one value");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (k) out += ',';
    if constexpr (std::is_same_v<T, LossKind>) {
      out += to_string(values[k]);
    } else {
      out += std::to_string(values[k]);
    }
  }
  return out;
}

std::ifstream open_input(const std::filesystem::path& path, const std::string& producer) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("missing artifact '" + path.string() + "'; run `ebpr " + producer + "` first");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::string loss_slug(LossKind k) {
  std::string s = to_string(k);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "data_path") data_path = value;
  else if (key == "format") format = FormatSpec::parse(value).to_string();
  else if (key == "threshold") threshold = parse_real(key, value);
  else if (key == "min_user_interactions") min_user_interactions = parse_number<std::size_t>(key, value);
  else if (key == "out_dir") out_dir = value;
  else if (key == "loss") training.loss = parse_loss_kind(value);
  else if (key == "losses") {
    losses.clear();
    for (const auto& t : split_list(value)) losses.push_back(parse_loss_kind(t));
    if (losses.empty()) throw ConfigError("losses needs at least one value");
  }
  else if (key == "latent_dim") training.latent_dim = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") training.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "l2") training.l2 = parse_real(key, value);
  else if (key == "eta") training.eta = parse_number<std::size_t>(key, value);
  else if (key == "learning_rate") training.learning_rate = parse_real(key, value);
  else if (key == "max_epochs") training.max_epochs = parse_number<std::size_t>(key, value);
  else if (key == "patience") training.patience = parse_number<std::size_t>(key, value);
  else if (key == "weight_clip") training.weight_clip = parse_bool(key, value);
  else if (key == "training_threads") training.threads = parse_number<unsigned>(key, value);
  else if (key == "cutoff") {
    cutoff = parse_number<std::size_t>(key, value);
    training.eval_cutoff = cutoff;
  }
  else if (key == "replicates") replicates = parse_number<std::size_t>(key, value);
  else if (key == "n_eval_negatives") n_eval_negatives = parse_number<std::size_t>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "search_configs") search_configs = parse_number<std::size_t>(key, value);
  else if (key == "search_replicates") search_replicates = parse_number<std::size_t>(key, value);
  else if (key == "variant") variant = parse_neighborhood_variant(value);
  else if (key == "propensity_floor") propensity_floor = parse_real(key, value);
  else if (key == "threads") threads = parse_number<unsigned>(key, value);
  else if (key == "sweep_etas") sweep_etas = parse_sizes(key, value);
  else if (key == "sparsity_min_counts") sparsity_min_counts = parse_sizes(key, value);
  else if (key == "oracle_users") oracle_users = parse_number<std::size_t>(key, value);
  else if (key == "oracle_items") oracle_items = parse_number<std::size_t>(key, value);
  else if (key == "oracle_eta") oracle_eta = parse_number<std::size_t>(key, value);
  else if (key == "oracle_draws") oracle_draws = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown configuration key '" + key + "'");
}

std::map<std::string, std::string> RunConfig::to_map() const {
  return {
      {"data_path", data_path},
      {"format", format},
      {"threshold", format_real(threshold)},
      {"min_user_interactions", std::to_string(min_user_interactions)},
      {"out_dir", out_dir},
      {"loss", to_string(training.loss)},
      {"losses", join(losses)},
      {"latent_dim", std::to_string(training.latent_dim)},
      {"batch_size", std::to_string(training.batch_size)},
      {"l2", format_real(training.l2)},
      {"eta", std::to_string(training.eta)},
      {"learning_rate", format_real(training.learning_rate)},
      {"max_epochs", std::to_string(training.max_epochs)},
      {"patience", std::to_string(training.patience)},
      {"weight_clip", training.weight_clip ? "true" : "false"},
      {"training_threads", std::to_string(training.threads)},
      {"cutoff", std::to_string(cutoff)},
      {"replicates", std::to_string(replicates)},
      {"n_eval_negatives", std::to_string(n_eval_negatives)},
      {"seed", std::to_string(seed)},
      {"search_configs", std::to_string(search_configs)},
      {"search_replicates", std::to_string(search_replicates)},
      {"variant", to_string(variant)},
      {"propensity_floor", format_real(propensity_floor)},
      {"threads", std::to_string(threads)},
      {"sweep_etas", join(sweep_etas)},
      {"sparsity_min_counts", join(sparsity_min_counts)},
      {"oracle_users", std::to_string(oracle_users)},
      {"oracle_items", std::to_string(oracle_items)},
      {"oracle_eta", std::to_string(oracle_eta)},
      {"oracle_draws", std::to_string(oracle_draws)},
  };
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

std::filesystem::path RunConfig::resolved_data_path() const {
  if (!data_path.empty()) return data_path;
  if (const char* dir = std::getenv("EBPR_DATA_DIR"); dir && *dir) {
    return std::filesystem::path(dir) / "ml-100k" / "u.data";
  }
  throw ConfigError("no dataset given: pass --data or set EBPR_DATA_DIR");
}

void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": expected 'key = value'");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  apply_config_text(cfg, in, path.string());
}

std::filesystem::path ArtifactPaths::neighborhoods(const std::string& stage) const {
  return root / ("neighborhoods_" + stage + ".tsv");
}
std::filesystem::path ArtifactPaths::explainability(const std::string& stage) const {
  return root / ("explainability_" + stage + ".tsv");
}
std::filesystem::path ArtifactPaths::propensities(const std::string& stage) const {
  return root / ("propensities_" + stage + ".tsv");
}
std::filesystem::path ArtifactPaths::search_report(LossKind k) const {
  return root / ("tune_" + loss_slug(k) + ".tsv");
}
std::filesystem::path ArtifactPaths::best_config(LossKind k) const {
  return root / ("best_" + loss_slug(k) + ".cfg");
}
std::filesystem::path ArtifactPaths::checkpoint(LossKind k, std::size_t replicate) const {
  return root / "models" / (loss_slug(k) + "_r" + std::to_string(replicate) + ".ckpt");
}
std::filesystem::path ArtifactPaths::training_log(LossKind k) const {
  return root / "models" / (loss_slug(k) + "_history.tsv");
}
std::filesystem::path ArtifactPaths::manifest(const std::string& command) const {
  return root / "manifests" / (command + ".manifest");
}

void write_manifest(const ArtifactPaths& paths, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& facts) {
  auto out = open_output(paths.manifest(command));
  out << "command = " << command << '\n';
  out << "version = " << version_string() << '\n';
  out << "seed.split = " << cfg.split_seed() << '\n';
  out << "seed.search = " << cfg.search_seed() << '\n';
  out << "seed.train = " << cfg.train_seed() << '\n';
  out << "seed.oracle = " << cfg.oracle_seed() << '\n';
  for (const auto& [k, v] : facts) out << k << " = " << v << '\n';
  for (const auto& [k, v] : cfg.to_map()) out << "config." << k << " = " << v << '\n';
}

void write_ingest_report(const IngestStats& s, std::ostream& out) {
  out << "users=" << s.users << '\n'
      << "items=" << s.items << '\n'
      << "interactions=" << s.interactions << '\n'
      << "sparsity=" << std::fixed << std::setprecision(6) << s.sparsity << std::defaultfloat << '\n'
      << "raw_records=" << s.raw_records << '\n'
      << "malformed_lines=" << s.malformed_lines << '\n';
}

InteractionDataset load_dataset_artifact(const ArtifactPaths& paths) { return load_dataset(paths.dataset()); }

LooSplit load_split_artifact(const ArtifactPaths& paths, const InteractionDataset& full) {
  auto in = open_input(paths.split(), "split");
  return read_split_manifest(in, full);
}

namespace {

struct StageArtifacts {
  std::shared_ptr<const ItemNeighborhoods> neighborhoods;
  ExplainabilityMatrix explainability;
  std::optional<PropensityModel> propensity;
};

StageArtifacts load_stage(const ArtifactPaths& paths, const std::string& stage, const InteractionDataset& full,
                          std::size_t eta, bool with_propensity) {
  StageArtifacts s;
  {
    auto in = open_input(paths.neighborhoods(stage), "precompute");
    s.neighborhoods = std::make_shared<const ItemNeighborhoods>(read_neighborhoods(in, full));
  }
  if (s.neighborhoods->eta() != eta) {
    throw ConfigError("precomputed artifacts use eta=" + std::to_string(s.neighborhoods->eta()) +
                      " but the run asks for eta=" + std::to_string(eta) + "; rerun `ebpr precompute`");
  }
  {
    auto in = open_input(paths.explainability(stage), "precompute");
    s.explainability = read_explainability(in, full, s.neighborhoods);
  }
  if (with_propensity) {
    auto in = open_input(paths.propensities(stage), "precompute");
    s.propensity = read_propensities(in, full);
  }
  return s;
}

void save_stage(const ArtifactPaths& paths, const std::string& stage, const InteractionDataset& full,
                const ExplainabilityMatrix& e, const PropensityModel* prop) {
  {
    auto out = open_output(paths.neighborhoods(stage));
    write_neighborhoods(e.neighborhoods(), full, out);
  }
  {
    auto out = open_output(paths.explainability(stage));
    write_explainability(e, full, out);
  }
  if (prop) {
    auto out = open_output(paths.propensities(stage));
    write_propensities(*prop, full, out);
  }
}

// Tuned hyper-parameters for `loss` when a search has run, else the
// configured ones; merged retraining has no validation set to stop on.
TrainingConfig retrain_config(const RunConfig& cfg, LossKind loss, const ArtifactPaths& paths, bool* tuned) {
  RunConfig c = cfg;
  c.training.loss = loss;
  *tuned = false;
  if (std::ifstream in(paths.best_config(loss)); in) {
    apply_config_text(c, in, paths.best_config(loss).string());
    *tuned = true;
  }
  c.training.loss = loss;
  c.training.patience = 0;
  c.training.seed = cfg.train_seed();
  c.training.eval_cutoff = cfg.cutoff;
  return c.training;
}

FactorModel load_checkpoint(const std::filesystem::path& path, const InteractionDataset& ds) {
  auto in = open_input(path, "train");
  CheckpointHeader h;
  auto m = read_checkpoint(in, &h);
  if (h.n_users != ds.n_users() || h.n_items != ds.n_items()) {
    throw DataError("checkpoint '" + path.string() + "' does not match the dataset; rerun `ebpr train`");
  }
  return m;
}

}  // namespace

IngestStats cmd_ingest(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto source = cfg.resolved_data_path();
  const auto loaded = load_interactions(source, FormatSpec::parse(cfg.format));
  for (std::size_t k = 0; k < std::min<std::size_t>(loaded.warnings.size(), 5); ++k) {
    log << "warning: line " << loaded.warnings[k].line << ": " << loaded.warnings[k].message << '\n';
  }
  if (loaded.warnings.size() > 5) log << "warning: " << loaded.warnings.size() - 5 << " more malformed lines\n";
  const auto ds = filter_min_interactions(binarize_and_index(loaded.records, cfg.threshold), cfg.min_user_interactions);
  if (ds.interaction_count() == 0) throw DataError("no interactions left after binarization and filtering");
  save_dataset(ds, paths.dataset());
  IngestStats s;
  s.users = ds.n_users();
  s.items = ds.n_items();
  s.interactions = ds.interaction_count();
  s.sparsity = ds.sparsity();
  s.raw_records = loaded.records.size();
  s.malformed_lines = loaded.warnings.size();
  {
    auto out = open_output(paths.ingest_report());
    write_ingest_report(s, out);
  }
  write_ingest_report(s, log);
  write_manifest(paths, "ingest", cfg,
                 {{"source", source.string()}, {"dataset_fingerprint", to_hex(ds.fingerprint())}});
  return s;
}

void cmd_split(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = loo_split(full, cfg.n_eval_negatives, cfg.split_seed());
  {
    auto out = open_output(paths.split());
    write_split_manifest(split, out);
  }
  log << "split: " << split.test.size() << " users, " << split.train.interaction_count()
      << " training interactions, " << cfg.n_eval_negatives << " negatives per holdout\n";
  write_manifest(paths, "split", cfg,
                 {{"dataset_fingerprint", to_hex(full.fingerprint())},
                  {"train_interactions", std::to_string(split.train.interaction_count())}});
}

void cmd_precompute(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = load_split_artifact(paths, full);
  const auto merged = merge_validation(split);
  const std::size_t eta = cfg.training.eta;

  const auto e_tune = explainability_for_phase(split, eta, Phase::training, cfg.threads);
  const auto p_tune = build_propensity_model(split.train, e_tune.neighborhoods(), cfg.variant, cfg.propensity_floor);
  save_stage(paths, "tune", full, e_tune, &p_tune);

  const auto e_retrain = explainability_for_phase(merged, eta, Phase::training, cfg.threads);
  const auto p_retrain =
      build_propensity_model(merged.train, e_retrain.neighborhoods(), cfg.variant, cfg.propensity_floor);
  save_stage(paths, "retrain", full, e_retrain, &p_retrain);

  const auto e_eval = explainability_for_phase(split, eta, Phase::evaluation, cfg.threads);
  save_stage(paths, "eval", full, e_eval, nullptr);

  const double avg = average_explainability(e_eval, full);
  log << "precompute: eta=" << eta << " average E (all data) = " << format_real(avg) << '\n';
  write_manifest(paths, "precompute", cfg,
                 {{"dataset_fingerprint", to_hex(full.fingerprint())},
                  {"average_explainability_eval", format_real(avg)},
                  {"average_explainability_tune", format_real(average_explainability(e_tune, split.train))}});
}

SearchResult cmd_tune(const RunConfig& cfg, LossKind loss, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = load_split_artifact(paths, full);
  const auto stage = load_stage(paths, "tune", full, cfg.training.eta, true);
  TrainingConfig base = cfg.training;
  base.loss = loss;
  base.eval_cutoff = cfg.cutoff;
  const WeightInputs inputs{&stage.explainability, &*stage.propensity, base.weight_clip};
  auto result =
      hyperparameter_search(split, base, HyperGrid{}, cfg.search_configs, cfg.search_replicates, cfg.search_seed(), inputs);
  {
    auto out = open_output(paths.search_report(loss));
    write_search_report(result, out);
  }
  const auto best = merged_retrain_config(result);
  {
    auto out = open_output(paths.best_config(loss));
    out << "latent_dim = " << best.latent_dim << '\n'
        << "batch_size = " << best.batch_size << '\n'
        << "l2 = " << format_real(best.l2) << '\n'
        << "max_epochs = " << best.max_epochs << '\n';
  }
  for (const auto& w : result.warnings) log << "warning: " << w << '\n';
  log << "tune " << to_string(loss) << ": best K=" << best.latent_dim << " batch=" << best.batch_size
      << " l2=" << format_real(best.l2) << " mean validation NDCG@" << cfg.cutoff << "="
      << format_real(result.trials[result.best_trial].mean_ndcg) << " retrain epochs=" << best.max_epochs << '\n';
  write_manifest(paths, "tune_" + loss_slug(loss), cfg,
                 {{"dataset_fingerprint", to_hex(full.fingerprint())},
                  {"best_latent_dim", std::to_string(best.latent_dim)},
                  {"best_batch_size", std::to_string(best.batch_size)},
                  {"best_l2", format_real(best.l2)},
                  {"retrain_epochs", std::to_string(best.max_epochs)}});
  return result;
}

void cmd_train(const RunConfig& cfg, LossKind loss, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = merge_validation(load_split_artifact(paths, full));
  const auto stage = load_stage(paths, "retrain", full, cfg.training.eta, true);
  bool tuned = false;
  const TrainingConfig tc = retrain_config(cfg, loss, paths, &tuned);
  if (!tuned) log << "train " << to_string(loss) << ": no tuned configuration found, using the configured one\n";
  const WeightInputs inputs{&stage.explainability, &*stage.propensity, tc.weight_clip};
  auto history = open_output(paths.training_log(loss));
  history << "replicate\tepoch\tmean_loss\n";
  std::vector<std::pair<std::string, std::string>> facts{{"dataset_fingerprint", to_hex(full.fingerprint())},
                                                         {"tuned", tuned ? "true" : "false"}};
  {
    std::istringstream lines(describe(tc));
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find('=');
      facts.emplace_back("training." + line.substr(0, eq), line.substr(eq + 1));
    }
  }
  for (std::size_t r = 0; r < cfg.replicates; ++r) {
    TrainingConfig rc = tc;
    rc.seed = derive_seed(tc.seed, r);
    const auto result = train(split, rc, inputs);
    for (const auto& e : result.history.epochs) {
      history << r << '\t' << e.epoch << '\t' << format_real(e.mean_loss) << '\n';
    }
    CheckpointHeader h{full.n_users(), full.n_items(), rc.latent_dim, rc.seed, to_string(loss)};
    auto out = open_output(paths.checkpoint(loss, r));
    write_checkpoint(result.model, h, out);
    facts.emplace_back("replicate." + std::to_string(r) + ".seed", std::to_string(rc.seed));
    log << "train " << to_string(loss) << " replicate " << r << ": " << result.history.epochs.size()
        << " epochs, final loss " << format_real(result.history.epochs.empty() ? 0.0 : result.history.epochs.back().mean_loss)
        << '\n';
  }
  write_manifest(paths, "train_" + loss_slug(loss), cfg, facts);
}

std::vector<std::pair<std::string, ReplicateSummary>> cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = merge_validation(load_split_artifact(paths, full));
  const auto eval = load_stage(paths, "eval", full, cfg.training.eta, false);
  const auto retrain = load_stage(paths, "retrain", full, cfg.training.eta, true);
  const auto theta = retrain.propensity->clamped_items();

  std::vector<std::pair<std::string, ReplicateSummary>> rows;
  std::vector<std::pair<std::string, std::string>> facts{{"dataset_fingerprint", to_hex(full.fingerprint())}};
  for (LossKind loss : cfg.losses) {
    if (!std::filesystem::exists(paths.checkpoint(loss, 0))) {
      log << "evaluate: no checkpoints for " << to_string(loss) << ", skipped\n";
      continue;
    }
    const auto summary = run_replicates(cfg.replicates, 0, [&](std::size_t r, std::uint64_t) {
      std::ifstream probe(paths.checkpoint(loss, r));
      if (!probe) {
        throw DataError("missing checkpoint '" + paths.checkpoint(loss, r).string() + "'; run `ebpr train --loss " +
                        std::string(to_string(loss)) + "` with replicates=" + std::to_string(cfg.replicates));
      }
      CheckpointHeader h;
      const auto model = read_checkpoint(probe, &h);
      if (h.n_users != full.n_users() || h.n_items != full.n_items()) {
        throw DataError("checkpoint for " + std::string(to_string(loss)) + " does not match the dataset; rerun `ebpr train`");
      }
      const auto eval_split = resample_eval_negatives(split, replicate_negative_seed(split.seed, r));
      auto report = evaluate_loo(model, eval_split, eval.explainability, theta, cfg.cutoff);
      report.seed = h.seed;
      return report;
    });
    facts.emplace_back("evaluated." + std::string(to_string(loss)), std::to_string(summary.replicates.size()));
    rows.emplace_back(to_string(loss), summary);
  }
  if (rows.empty()) throw DataError("no trained models in '" + paths.root.string() + "'; run `ebpr train` first");
  {
    auto out = open_output(paths.report_table());
    write_report_table(rows, out);
  }
  {
    auto out = open_output(paths.report_rows());
    out << "model\tmetric\treplicate\tvalue\n";
    for (const auto& [model, s] : rows) write_report_rows(model, s, out);
  }
  write_report_table(rows, log);
  write_manifest(paths, "evaluate", cfg, facts);
  return rows;
}

void cmd_sweep_eta(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto split = load_split_artifact(paths, full);
  auto out = open_output(paths.sweep_report());
  out << "eta\tmodel\tmetric\tmean\tstd\n";
  for (std::size_t eta : cfg.sweep_etas) {
    for (LossKind loss : cfg.losses) {
      bool tuned = false;
      TrainingConfig tc = retrain_config(cfg, loss, paths, &tuned);
      tc.eta = eta;
      ReplicateOptions opts;
      opts.k_cut = cfg.cutoff;
      opts.variant = cfg.variant;
      opts.propensity_floor = cfg.propensity_floor;
      opts.threads = cfg.threads;
      const auto s = run_replicates(split, tc, cfg.replicates, opts);
      for (const auto& [name, m] : s.summary) {
        out << eta << '\t' << to_string(loss) << '\t' << name << '\t' << format_real(m.mean) << '\t'
            << format_real(m.stddev) << '\n';
      }
      log << "sweep eta=" << eta << " " << to_string(loss) << ": NDCG=" << format_real(s.summary.at("NDCG").mean)
          << " MEP=" << format_real(s.summary.at("MEP").mean) << '\n';
    }
  }
  write_manifest(paths, "sweep_eta", cfg, {{"dataset_fingerprint", to_hex(full.fingerprint())}});
}

std::vector<SparsityRow> sparsity_study(const InteractionDataset& ds, std::size_t eta,
                                        const std::vector<std::size_t>& min_counts, unsigned threads) {
  std::vector<SparsityRow> rows;
  for (std::size_t m : min_counts) {
    const auto f = filter_min_item_interactions(ds, m);
    SparsityRow r;
    r.min_item_count = m;
    r.users = f.n_users();
    r.items = f.n_items();
    r.interactions = f.interaction_count();
    r.sparsity = f.sparsity();
    if (r.interactions > 0) {
      auto nbrs = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(f, eta, threads));
      r.average_explainability = average_explainability(build_explainability(f, nbrs), f);
    }
    rows.push_back(r);
  }
  std::sort(rows.begin(), rows.end(), [](const SparsityRow& a, const SparsityRow& b) { return a.sparsity < b.sparsity; });
  return rows;
}

std::vector<SparsityRow> cmd_sparsity_study(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto rows = sparsity_study(full, cfg.training.eta, cfg.sparsity_min_counts, cfg.threads);
  std::ostringstream table;
  table << "min_item_count\tusers\titems\tinteractions\tsparsity\taverage_E\n";
  for (const auto& r : rows) {
    table << r.min_item_count << '\t' << r.users << '\t' << r.items << '\t' << r.interactions << '\t'
          << format_real(r.sparsity) << '\t' << format_real(r.average_explainability) << '\n';
  }
  {
    auto out = open_output(paths.sparsity_report());
    out << table.str();
  }
  log << table.str();
  write_manifest(paths, "sparsity_study", cfg, {{"dataset_fingerprint", to_hex(full.fingerprint())}});
  return rows;
}

void cmd_explain(const RunConfig& cfg, const std::string& user, const std::optional<std::string>& item,
                 std::size_t replicate, std::ostream& out) {
  const ArtifactPaths paths(cfg.out_dir);
  const auto full = load_dataset_artifact(paths);
  const auto u = full.find_user(user);
  if (!u) {
    throw DataError("unknown user id '" + user + "'; valid ids are listed in '" +
                    (paths.dataset() / "users.tsv").string() + "'");
  }
  const auto eval = load_stage(paths, "eval", full, cfg.training.eta, false);
  const auto model = load_checkpoint(paths.checkpoint(cfg.training.loss, replicate), full);

  std::vector<ItemIndex> items;
  if (item) {
    const auto i = full.find_item(*item);
    if (!i) {
      throw DataError("unknown item id '" + *item + "'; valid ids are listed in '" +
                      (paths.dataset() / "items.tsv").string() + "'");
    }
    items.push_back(*i);
  } else {
    items = recommend(model, full, *u, cfg.cutoff).items;
  }
  out << "user " << user << " (" << to_string(cfg.training.loss) << ", replicate " << replicate << ")\n";
  for (std::size_t k = 0; k < items.size(); ++k) {
    const ItemIndex i = items[k];
    const double e = eval.explainability.value(*u, i);
    const auto ex = explain_recommendation(*u, i, *eval.neighborhoods, full);
    out << (item ? std::string("-") : std::to_string(k + 1)) << ". item " << full.item_id(i)
        << "  score=" << format_real(score(model, *u, i)) << "  E=" << format_real(e) << '\n';
    if (ex.liked_neighbors.empty()) {
      out << "   no item-based explanation\n";
      continue;
    }
    out << "   because you liked:";
    for (const auto& nb : ex.liked_neighbors) out << ' ' << full.item_id(nb.item) << " (" << format_real(nb.similarity) << ")";
    out << '\n';
  }
}

OracleReport cmd_oracle(const RunConfig& cfg, std::ostream& log) {
  const ArtifactPaths paths(cfg.out_dir);
  OracleOptions opts;
  opts.world.n_users = cfg.oracle_users;
  opts.world.n_items = cfg.oracle_items;
  opts.world.eta = cfg.oracle_eta;
  opts.world.seed = cfg.oracle_seed();
  opts.n_draws = cfg.oracle_draws;
  opts.seed = derive_seed(cfg.oracle_seed(), 1);
  opts.threads = cfg.threads;
  const auto report = run_oracle(opts);
  {
    auto out = open_output(paths.oracle_report());
    write_oracle_report(report, out);
  }
  write_oracle_report(report, log);
  write_manifest(paths, "oracle", cfg, {{"result", report.passed() ? "PASS" : "FAIL"}});
  return report;
}

void cmd_pipeline(const RunConfig& cfg, bool skip_tune, std::ostream& log) {
  cmd_ingest(cfg, log);
  cmd_split(cfg, log);
  cmd_precompute(cfg, log);
  for (LossKind loss : cfg.losses) {
    if (!skip_tune) cmd_tune(cfg, loss, log);
    cmd_train(cfg, loss, log);
  }
  cmd_evaluate(cfg, log);
}

}  // namespace ebpr
