#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ebpr/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Options {
  std::string config_file;
  std::vector<std::string> settings;
  std::optional<std::string> out_dir;
  std::optional<std::string> data;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool deterministic = false;
  std::vector<std::string> losses;
  std::vector<std::size_t> etas;
  std::string user;
  std::optional<std::string> item;
  std::size_t replicate = 0;
  std::optional<std::size_t> draws;
  bool skip_tune = false;
};

ebpr::RunConfig resolve(const Options& o) {
  ebpr::RunConfig cfg;
  if (!o.config_file.empty()) ebpr::load_config_file(cfg, o.config_file);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ebpr::ConfigError("--set expects key=value, got '" + s + "'");
    cfg.set(s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.out_dir) cfg.out_dir = *o.out_dir;
  if (o.data) cfg.data_path = *o.data;
  if (o.seed) cfg.seed = *o.seed;
  if (o.threads) cfg.threads = *o.threads;
  if (o.deterministic) cfg.training.threads = 1;
  if (!o.losses.empty()) {
    cfg.losses.clear();
    for (const auto& l : o.losses) cfg.losses.push_back(ebpr::parse_loss_kind(l));
    cfg.training.loss = cfg.losses.front();
  }
  if (!o.etas.empty()) cfg.sweep_etas = o.etas;
  if (o.draws) cfg.oracle_draws = *o.draws;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable and unbiased BPR recommenders: data pipeline, training, evaluation"};
  app.set_version_flag("--version", ebpr::version_string());
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("-c,--config", o.config_file, "Flat key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", o.settings, "Override one config key (key=value), repeatable");
  app.add_option("-o,--out", o.out_dir, "Output directory for artifacts");
  app.add_option("-d,--data", o.data, "Raw interaction log (default $EBPR_DATA_DIR/ml-100k/u.data)");
  app.add_option("--seed", o.seed, "Master seed");
  app.add_option("--threads", o.threads, "Worker threads for neighborhoods and oracle draws");
  app.add_flag("--deterministic", o.deterministic, "Force single-threaded training");

  auto* ingest = app.add_subcommand("ingest", "Load, binarize and filter the raw log; print dataset stats");
  auto* split = app.add_subcommand("split", "Leave-one-out split with sampled evaluation negatives");
  auto* precompute = app.add_subcommand("precompute", "Neighborhoods, explainability and propensities");
  auto* tune = app.add_subcommand("tune", "Random hyper-parameter search on the validation holdouts");
  auto* train = app.add_subcommand("train", "Retrain on train + validation for every replicate");
  auto* evaluate = app.add_subcommand("evaluate", "Metric table for all trained models");
  auto* sweep = app.add_subcommand("sweep", "Neighborhood-size sweep");
  auto* sparsity = app.add_subcommand("sparsity-study", "Average explainability against data sparsity");
  auto* explain = app.add_subcommand("explain", "Show a user's recommendations with explanations");
  auto* oracle = app.add_subcommand("oracle", "Monte Carlo bias check of the pUEBPR and UEBPR estimators");
  auto* pipeline = app.add_subcommand("pipeline", "ingest, split, precompute, tune, train and evaluate");

  for (auto* sc : {tune, train, evaluate, sweep, pipeline}) {
    sc->add_option("-l,--loss", o.losses, "Loss kinds (BPR, UBPR, EBPR, pUEBPR, UEBPR)")->delimiter(',');
  }
  explain->add_option("-l,--loss", o.losses, "Model to explain")->delimiter(',');
  sweep->add_option("--eta", o.etas, "Neighborhood sizes to sweep")->delimiter(',');
  explain->add_option("-u,--user", o.user, "Raw user id")->required();
  explain->add_option("-i,--item", o.item, "Explain one raw item id instead of the Top-K");
  explain->add_option("-r,--replicate", o.replicate, "Replicate checkpoint to use");
  oracle->add_option("--draws", o.draws, "Monte Carlo draws");
  pipeline->add_flag("--skip-tune", o.skip_tune, "Train with the configured hyper-parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    const auto cfg = resolve(o);
    auto& log = std::cout;
    if (*ingest) ebpr::cmd_ingest(cfg, log);
    else if (*split) ebpr::cmd_split(cfg, log);
    else if (*precompute) ebpr::cmd_precompute(cfg, log);
    else if (*tune) for (auto l : cfg.losses) ebpr::cmd_tune(cfg, l, log);
    else if (*train) for (auto l : cfg.losses) ebpr::cmd_train(cfg, l, log);
    else if (*evaluate) ebpr::cmd_evaluate(cfg, log);
    else if (*sweep) ebpr::cmd_sweep_eta(cfg, log);
    else if (*sparsity) ebpr::cmd_sparsity_study(cfg, log);
    else if (*explain) ebpr::cmd_explain(cfg, o.user, o.item, o.replicate, log);
    else if (*oracle) ebpr::cmd_oracle(cfg, log);
    else if (*pipeline) ebpr::cmd_pipeline(cfg, o.skip_tune, log);
  } catch (const ebpr::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ebpr::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumeric;
  } catch (const ebpr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
