#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage error, 2 runtime
// error. Progress goes to `err`; machine-readable results only to files
// named by flags (gradcheck also prints its error figure to `out`).

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "siamese/siamese.hpp"

namespace siamese::cli {

namespace detail {

inline Checkpoint load_model(const std::string& path) { return load_checkpoint(path); }

/// Loads a dataset and centers it with the model's stored training mean.
inline LabeledDataset load_centered(const std::string& data, const Checkpoint& ckpt) {
  auto ds = load_csv(data);
  if (ckpt.input_mean.size() > 0) apply_mean(ds, ckpt.input_mean);
  ds.n_classes = std::max(ds.n_classes, ckpt.params.n_classes());
  return ds;
}

}  // namespace detail

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Siamese joint-objective embedding trainer"};
  app.require_subcommand(1);

  // gen-data
  SyntheticSpec spec;
  std::string mode = "blobs";
  std::string gen_out;
  std::string gen_test_out;
  double test_fraction = 0.2;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic labeled dataset (CSV)");
  gen->add_option("--mode", mode, "blobs or textures")->check(CLI::IsMember({"blobs", "textures"}));
  gen->add_option("--classes", spec.n_classes)->check(CLI::PositiveNumber);
  gen->add_option("--per-class", spec.per_class)->check(CLI::PositiveNumber);
  auto* dim_opt = gen->add_option("--dim", spec.dim, "feature dimension (blobs)");
  auto* side_opt = gen->add_option("--side", spec.side, "image side (textures)");
  dim_opt->excludes(side_opt);
  gen->add_option("--spread", spec.spread, "within-class noise std");
  gen->add_option("--separation", spec.separation, "between-class scale");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--out", gen_out, "output CSV (training part when --test-out is given)")->required();
  gen->add_option("--test-out", gen_test_out, "write a stratified held-out split here");
  gen->add_option("--test-fraction", test_fraction, "held-out fraction per class")
      ->check(CLI::Range(0.0, 0.99));

  // train
  std::string train_data;
  std::string train_config;
  std::string out_model;
  std::string log_path;
  std::optional<double> lambda;
  std::optional<double> margin;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::uint64_t> seed;
  auto* tr = app.add_subcommand("train", "Train on a dataset CSV");
  tr->add_option("--data", train_data, "training CSV")->required();
  tr->add_option("--config", train_config, "key = value config file");
  tr->add_option("--lambda", lambda);
  tr->add_option("--margin", margin);
  tr->add_option("--lr", lr);
  tr->add_option("--epochs", epochs);
  tr->add_option("--batch", batch);
  tr->add_option("--seed", seed);
  tr->add_option("--out-model", out_model, "model checkpoint to write")->required();
  tr->add_option("--log", log_path, "per-epoch CSV log");

  // eval
  std::string eval_data;
  std::string eval_model;
  std::string eval_out;
  double eval_margin = 1.0;
  auto* ev = app.add_subcommand("eval", "Evaluate a model on a dataset");
  ev->add_option("--data", eval_data)->required();
  ev->add_option("--model", eval_model)->required();
  ev->add_option("--margin", eval_margin, "margin for the violation rate");
  ev->add_option("--out", eval_out, "metrics file")->required();

  // gradcheck
  std::uint64_t gc_seed = 0;
  double gc_eps = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of all gradients");
  gc->add_option("--seed", gc_seed);
  gc->add_option("--eps", gc_eps)->check(CLI::PositiveNumber);

  // sweep-lambda
  std::string sw_train;
  std::string sw_test;
  std::string sw_config;
  std::string sw_out;
  std::vector<double> sw_lambdas;
  std::vector<std::uint64_t> sw_seeds;
  auto* sw = app.add_subcommand("sweep-lambda", "Train across lambda values and seeds");
  sw->add_option("--train", sw_train)->required();
  sw->add_option("--test", sw_test)->required();
  sw->add_option("--config", sw_config);
  sw->add_option("--lambdas", sw_lambdas, "comma-separated")->delimiter(',')->required();
  sw->add_option("--seeds", sw_seeds, "comma-separated")->delimiter(',')->required();
  sw->add_option("--out", sw_out)->required();

  // export-embeddings
  std::string ex_data;
  std::string ex_model;
  std::string ex_out;
  bool ex_pca = false;
  auto* ex = app.add_subcommand("export-embeddings", "Write per-sample embeddings as CSV");
  ex->add_option("--data", ex_data)->required();
  ex->add_option("--model", ex_model)->required();
  ex->add_option("--out", ex_out)->required();
  ex->add_flag("--pca2d", ex_pca, "append a 2-D PCA projection");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << " (run with --help)\n";
    return 1;
  }

  try {
    if (*gen) {
      spec.mode = mode == "textures" ? SyntheticMode::textures : SyntheticMode::blobs;
      const auto ds = gen_synthetic(spec);
      if (gen_test_out.empty()) {
        save_csv(ds, gen_out);
      } else {
        const auto split = split_dataset(ds, test_fraction, spec.seed);
        save_csv(split.train, gen_out);
        save_csv(split.test, gen_test_out);
      }
      err << "wrote " << ds.size() << " samples\n";
    } else if (*tr) {
      TrainConfig cfg;
      if (!train_config.empty()) cfg = load_config(train_config);
      if (lambda) cfg.lambda = *lambda;
      if (margin) cfg.margin = *margin;
      if (lr) cfg.lr = *lr;
      if (epochs) cfg.epochs = *epochs;
      if (batch) cfg.batch_size = *batch;
      if (seed) cfg.seed = *seed;
      validate_config(cfg);
      auto ds = load_csv(train_data);
      const Tensor mean = normalize_mean(ds);
      const auto result = train(ds, cfg);
      save_checkpoint({result.params, mean}, out_model);
      if (!log_path.empty()) text::write_file(log_path, log_to_csv(result.log));
      const auto& last = result.log.epochs.back();
      err << "trained " << cfg.epochs << " epochs: loss " << last.total << ", accuracy "
          << last.accuracy << "\n";
    } else if (*ev) {
      const auto ckpt = detail::load_model(eval_model);
      const auto ds = detail::load_centered(eval_data, ckpt);
      const auto metrics = evaluate(ckpt.params, ds, Margin(eval_margin));
      text::write_file(eval_out, metrics_to_text(metrics));
      err << "accuracy " << metrics.accuracy << ", separability "
          << metrics.distances.separability << "\n";
    } else if (*gc) {
      const auto report = run_gradcheck(make_gradcheck_case(gc_seed), gc_eps);
      out << "max_rel_error=" << text::format_double(report.max_rel_error) << "\n";
      err << report.checked << " entries checked, worst " << report.worst << "\n";
      return report.max_rel_error < 1e-5 ? 0 : 2;
    } else if (*sw) {
      TrainConfig cfg;
      if (!sw_config.empty()) cfg = load_config(sw_config);
      const auto rows = lambda_sweep(load_csv(sw_train), load_csv(sw_test), cfg, sw_lambdas,
                                     sw_seeds);
      text::write_file(sw_out, sweep_to_csv(rows));
      for (const auto& r : rows) {
        if (!r.ok()) err << "lambda " << r.lambda << " seed " << r.seed << ": " << r.error << "\n";
      }
      err << "wrote " << rows.size() << " sweep rows\n";
    } else if (*ex) {
      const auto ckpt = detail::load_model(ex_model);
      const auto ds = detail::load_centered(ex_data, ckpt);
      export_embeddings(ckpt.params, ds, ex_out, ex_pca);
      err << "exported " << ds.size() << " embeddings\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace siamese::cli
