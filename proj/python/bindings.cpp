#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "ebpr/pipeline.hpp"

namespace py = pybind11;
using namespace ebpr;

namespace {

struct Explainability {
  std::shared_ptr<const ItemNeighborhoods> neighborhoods;
  ExplainabilityMatrix matrix;
};

Explainability make_explainability(const InteractionDataset& ds, std::size_t eta, unsigned threads) {
  auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, eta, threads));
  return {nb, build_explainability(ds, nb)};
}

RunConfig config_from(const std::map<std::string, std::string>& settings) {
  RunConfig cfg;
  for (const auto& [k, v] : settings) cfg.set(k, v);
  return cfg;
}

py::dict summary_dict(const ReplicateSummary& s) {
  py::dict out;
  for (const auto& [name, m] : s.summary) out[py::str(name)] = py::make_tuple(m.mean, m.stddev);
  return out;
}

}  // namespace

PYBIND11_MODULE(_ebpr, m) {
  m.doc() = "Explainable and unbiased BPR recommenders";
  m.attr("__version__") = version_string();

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<NumericError>(m, "NumericError");

  py::enum_<LossKind>(m, "LossKind")
      .value("BPR", LossKind::bpr)
      .value("UBPR", LossKind::ubpr)
      .value("EBPR", LossKind::ebpr)
      .value("pUEBPR", LossKind::puebpr)
      .value("UEBPR", LossKind::uebpr);
  m.def("parse_loss_kind", [](const std::string& s) { return parse_loss_kind(s); });

  py::class_<InteractionDataset>(m, "InteractionDataset")
      .def_property_readonly("n_users", &InteractionDataset::n_users)
      .def_property_readonly("n_items", &InteractionDataset::n_items)
      .def_property_readonly("interaction_count", &InteractionDataset::interaction_count)
      .def_property_readonly("sparsity", &InteractionDataset::sparsity)
      .def("user_id", &InteractionDataset::user_id)
      .def("item_id", &InteractionDataset::item_id)
      .def("positives", [](const InteractionDataset& ds, UserIndex u) {
        std::vector<ItemIndex> out;
        for (const auto& p : ds.positives(u)) out.push_back(p.item);
        return out;
      })
      .def("item_count", &InteractionDataset::item_count);

  m.def(
      "from_pairs",
      [](const std::vector<std::pair<std::string, std::string>>& pairs) {
        std::vector<RawInteraction> raw;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          raw.push_back({pairs[k].first, pairs[k].second, 1.0, static_cast<std::int64_t>(k), k + 1});
        }
        return binarize_and_index(raw);
      },
      py::arg("pairs"), "Dataset from (user, item) pairs; list order is time order.");
  m.def(
      "load_dataset",
      [](const std::filesystem::path& path, const std::string& format, double threshold, std::size_t min_user) {
        const auto raw = load_interactions(path, FormatSpec::parse(format));
        return filter_min_interactions(binarize_and_index(raw.records, threshold), min_user);
      },
      py::arg("path"), py::arg("format") = "tab:u,i,r,t", py::arg("threshold") = 0.0,
      py::arg("min_user_interactions") = 10);

  py::class_<LooSplit>(m, "LooSplit")
      .def_readonly("full", &LooSplit::full)
      .def_readonly("train", &LooSplit::train)
      .def_property_readonly("merged", &LooSplit::merged)
      .def("test_item", [](const LooSplit& s, UserIndex u) { return s.test.at(u).item; })
      .def("test_negatives", [](const LooSplit& s, UserIndex u) { return s.test.at(u).negatives; });
  m.def("loo_split", &loo_split, py::arg("dataset"), py::arg("n_eval_negatives") = 100, py::arg("seed") = 0);
  m.def("merge_validation", &merge_validation);

  py::class_<Explainability>(m, "Explainability")
      .def_property_readonly("eta", [](const Explainability& e) { return e.matrix.eta(); })
      .def("value", [](const Explainability& e, UserIndex u, ItemIndex i) { return e.matrix.value(u, i); })
      .def("neighbors", [](const Explainability& e, ItemIndex i) {
        std::vector<std::pair<ItemIndex, double>> out;
        for (const auto& n : e.neighborhoods->of(i)) out.emplace_back(n.item, n.similarity);
        return out;
      });
  m.def("explainability", &make_explainability, py::arg("dataset"), py::arg("eta") = 20, py::arg("threads") = 1,
        "Neighborhoods and E over one dataset.");
  m.def(
      "average_explainability",
      [](const Explainability& e, const InteractionDataset& ds) { return average_explainability(e.matrix, ds); });
  m.def("cosine_item_similarity", &cosine_item_similarity);
  m.def("estimate_item_propensity", &estimate_item_propensity);

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("loss", &TrainingConfig::loss)
      .def_readwrite("latent_dim", &TrainingConfig::latent_dim)
      .def_readwrite("batch_size", &TrainingConfig::batch_size)
      .def_readwrite("l2", &TrainingConfig::l2)
      .def_readwrite("eta", &TrainingConfig::eta)
      .def_readwrite("learning_rate", &TrainingConfig::learning_rate)
      .def_readwrite("max_epochs", &TrainingConfig::max_epochs)
      .def_readwrite("patience", &TrainingConfig::patience)
      .def_readwrite("seed", &TrainingConfig::seed)
      .def_readwrite("weight_clip", &TrainingConfig::weight_clip)
      .def_readwrite("threads", &TrainingConfig::threads)
      .def("__repr__", [](const TrainingConfig& c) { return describe(c); });

  py::class_<FactorModel>(m, "FactorModel")
      .def_property_readonly("n_users", &FactorModel::n_users)
      .def_property_readonly("n_items", &FactorModel::n_items)
      .def_property_readonly("latent_dim", &FactorModel::latent_dim)
      .def("score", [](const FactorModel& f, UserIndex u, ItemIndex i) { return score(f, u, i); })
      .def("recommend", [](const FactorModel& f, const InteractionDataset& train, UserIndex u, std::size_t k) {
        return recommend(f, train, u, k).items;
      });

  py::class_<TrainingResult>(m, "TrainingResult")
      .def_readonly("model", &TrainingResult::model)
      .def_property_readonly("best_epoch", [](const TrainingResult& r) { return r.history.best_epoch; })
      .def_property_readonly("epoch_losses", [](const TrainingResult& r) {
        std::vector<double> out;
        for (const auto& e : r.history.epochs) out.push_back(e.mean_loss);
        return out;
      })
      .def_property_readonly("validation_ndcg", [](const TrainingResult& r) {
        std::vector<double> out;
        for (const auto& e : r.history.epochs) out.push_back(e.validation_ndcg);
        return out;
      });

  m.def(
      "train",
      [](const LooSplit& split, const TrainingConfig& cfg, unsigned threads) {
        const auto e = explainability_for_phase(split, cfg.eta, Phase::training, threads);
        const auto prop = build_propensity_model(split.train, e.neighborhoods());
        py::gil_scoped_release release;
        return train(split, cfg, {&e, &prop, cfg.weight_clip});
      },
      py::arg("split"), py::arg("config"), py::arg("threads") = 1,
      "Train with train-phase E and propensities computed from the split.");

  m.def(
      "evaluate",
      [](const FactorModel& model, const LooSplit& split, std::size_t eta, std::size_t cutoff) {
        const auto e = explainability_for_phase(split, eta, Phase::evaluation);
        const auto prop = build_propensity_model(split.train, e.neighborhoods());
        return evaluate_loo(model, split, e, prop.clamped_items(), cutoff).metrics;
      },
      py::arg("model"), py::arg("split"), py::arg("eta") = 20, py::arg("cutoff") = 10,
      "The seven leave-one-out metrics on the test holdouts.");

  m.def(
      "run_replicates",
      [](const LooSplit& split, const TrainingConfig& cfg, std::size_t n, std::size_t cutoff) {
        ReplicateOptions o;
        o.k_cut = cutoff;
        py::gil_scoped_release release;
        const auto s = run_replicates(split, cfg, n, o);
        py::gil_scoped_acquire acquire;
        return summary_dict(s);
      },
      py::arg("split"), py::arg("config"), py::arg("n") = 5, py::arg("cutoff") = 10,
      "Metric name -> (mean, stddev) over n merged-retrain replicates.");

  m.def(
      "oracle",
      [](std::size_t n_users, std::size_t n_items, std::size_t eta, std::size_t draws, std::uint64_t seed) {
        OracleOptions o;
        o.world.n_users = n_users;
        o.world.n_items = n_items;
        o.world.eta = eta;
        o.world.seed = derive_seed(seed, 1);
        o.seed = derive_seed(seed, 2);
        o.n_draws = draws;
        o.include_full_domain = false;
        const auto rep = run_oracle(o);
        py::dict out;
        out["ideal_loss"] = rep.ideal_loss;
        out["passed"] = rep.passed();
        py::list checks;
        for (const auto& c : rep.checks) {
          py::dict d;
          d["name"] = c.name;
          d["mean"] = c.measurement.mean;
          d["reference"] = c.measurement.ideal;
          d["standard_error"] = c.measurement.standard_error;
          d["z"] = c.measurement.z();
          d["expect_biased"] = c.expect_biased;
          d["passed"] = c.passed;
          checks.append(d);
        }
        out["checks"] = checks;
        return out;
      },
      py::arg("n_users") = 6, py::arg("n_items") = 12, py::arg("eta") = 3, py::arg("draws") = 10000,
      py::arg("seed") = 0, "Monte Carlo bias check of the pUEBPR and UEBPR estimators.");

  m.def(
      "run_command",
      [](const std::string& command, const std::map<std::string, std::string>& settings) {
        const auto cfg = config_from(settings);
        std::ostringstream log;
        if (command == "ingest") cmd_ingest(cfg, log);
        else if (command == "split") cmd_split(cfg, log);
        else if (command == "precompute") cmd_precompute(cfg, log);
        else if (command == "tune") for (auto l : cfg.losses) cmd_tune(cfg, l, log);
        else if (command == "train") for (auto l : cfg.losses) cmd_train(cfg, l, log);
        else if (command == "evaluate") cmd_evaluate(cfg, log);
        else if (command == "sweep") cmd_sweep_eta(cfg, log);
        else if (command == "sparsity-study") cmd_sparsity_study(cfg, log);
        else if (command == "oracle") cmd_oracle(cfg, log);
        else if (command == "pipeline") cmd_pipeline(cfg, false, log);
        else throw ConfigError("unknown command '" + command + "'");
        return log.str();
      },
      py::arg("command"), py::arg("settings"),
      "Run one CLI subcommand with config keys given as strings; returns its log.");
}
