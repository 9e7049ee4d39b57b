// Command-line front end: dataset generation, training, evaluation,
// gradient verification and embedding export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ucil/ucil.hpp"

namespace fs = std::filesystem;

namespace {

struct GenerateArgs {
  std::string preset;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_generate(const GenerateArgs& args) {
  ucil::SyntheticConfig config;
  if (!args.config_path.empty()) {
    std::ifstream in(args.config_path);
    if (!in) {
      std::cerr << "error: cannot open --config file " << args.config_path << "\n";
      return 1;
    }
    config = nlohmann::json::parse(in).get<ucil::SyntheticConfig>();
  } else if (!args.preset.empty()) {
    config = ucil::synthetic_preset(args.preset);
  }
  if (args.seed_set) config.seed = args.seed;

  const ucil::SplitDataset ds = ucil::generate_synthetic(config);
  ucil::save_bundle(args.out_dir, ds, nlohmann::json(config));

  std::cout << "wrote dataset bundle to " << args.out_dir << "\n";
  std::cout << "  messages: " << ds.size() << ", classes: " << ds.classes
            << ", train/val/test: " << ds.train_idx.size() << "/" << ds.val_idx.size() << "/"
            << ds.test_idx.size() << "\n";
  for (ucil::View v : ucil::kAllViews) {
    const auto q = ucil::edge_quality(ds.graph(v), ds.labels);
    std::cout << "  " << ucil::view_name(v) << ": "
              << ds.graph(v).edge_count_undirected() << " edges, same-class ratio ";
    if (q)
      std::cout << *q << "\n";
    else
      std::cout << "undefined (no non-self edges)\n";
  }
  return 0;
}

void add_config_overrides(CLI::App* cmd, ucil::TrainConfig& config, std::string& mode,
                          std::string& policy) {
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--batch-size", config.batch_size, "mini-batch size");
  cmd->add_option("--embed-dim", config.embed_dim, "encoder output dimension");
  cmd->add_option("--edl-hidden", config.edl_hidden, "evidential head hidden dimension");
  cmd->add_option("--gnn-layers", config.gnn_layers, "encoder layers");
  cmd->add_option("--beta", config.beta, "uncertainty margin coefficient");
  cmd->add_option("--lambda1", config.lambda1, "calibration loss weight");
  cmd->add_option("--lambda2", config.lambda2, "contrastive loss weight");
  cmd->add_option("--lambda3", config.lambda3, "consistency loss weight");
  cmd->add_option("--learning-rate", config.learning_rate, "Adam learning rate");
  cmd->add_option("--seed", config.seed, "training seed");
  cmd->add_option("--prototype-mode", mode, "learned|centroid");
  cmd->add_option("--margin-policy", policy, "none|fixed|error_rate|uncertainty");
}

int run_train(const std::string& data_dir, const std::string& out_dir,
              ucil::TrainConfig config) {
  config.validate();

  const ucil::SplitDataset ds = ucil::load_bundle(data_dir);
  fs::create_directories(out_dir);
  std::ofstream log(fs::path(out_dir) / "log.jsonl");
  if (!log) {
    std::cerr << "error: cannot write log under --out " << out_dir << "\n";
    return 1;
  }

  ucil::TrainResult result = ucil::train(ds, config, &log);

  ucil::Checkpoint ckpt;
  ckpt.config = config;
  ckpt.model = result.model;
  ckpt.table = result.table;
  ckpt.epoch = result.best_epoch;
  ckpt.val_accuracy = result.best_val_accuracy;
  ucil::save_checkpoint(fs::path(out_dir) / "checkpoint.bin", ckpt);

  std::cout << "trained " << config.epochs << " epochs; best validation accuracy "
            << result.best_val_accuracy << " at epoch " << result.best_epoch << "\n";
  std::cout << "wrote " << (fs::path(out_dir) / "checkpoint.bin").string() << " and "
            << (fs::path(out_dir) / "log.jsonl").string() << "\n";
  return 0;
}

int run_eval(const std::string& data_dir, const std::string& ckpt_path,
             const std::string& split, const std::string& out_dir) {
  const ucil::SplitDataset ds = ucil::load_bundle(data_dir);
  ucil::Checkpoint ckpt = ucil::load_checkpoint(ckpt_path);
  const ucil::MetricsReport report =
      ucil::evaluate(ckpt.model, ds, ds.split(split), ckpt.table);

  fs::create_directories(out_dir);
  std::ofstream jf(fs::path(out_dir) / "metrics.json");
  jf << ucil::metrics_to_json(report).dump(2) << '\n';
  ucil::write_metrics_csv(fs::path(out_dir) / "metrics.csv", report);

  std::cout << "split " << split << ": accuracy " << report.accuracy << ", macro-F1 "
            << report.macro_f1 << " (" << report.count << " samples)\n";
  std::cout << "groups (mean per-class F1): certain " << report.group_f1[0] << ", middle "
            << report.group_f1[1] << ", uncertain " << report.group_f1[2] << "\n";
  std::cout << "quadrants AC/AU/IC/IU: " << report.ac << "/" << report.au << "/" << report.ic
            << "/" << report.iu << "\n";
  std::cout << "wrote metrics.json and metrics.csv under " << out_dir << "\n";
  return 0;
}

int run_check_grad(std::uint64_t seed, double tol) {
  const ucil::GradSuiteResult result = ucil::run_grad_check_suite(seed, tol);
  for (const auto& c : result.checks)
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << c.name << "  max rel err "
              << c.max_rel_error << "\n";
  std::cout << (result.ok ? "all gradient checks passed" : "gradient checks FAILED") << "\n";
  return result.ok ? 0 : 1;
}

int run_export(const std::string& data_dir, const std::string& ckpt_path,
               const std::string& out_file) {
  const ucil::SplitDataset ds = ucil::load_bundle(data_dir);
  ucil::Checkpoint ckpt = ucil::load_checkpoint(ckpt_path);
  ucil::export_embeddings(out_file, ckpt.model, ds);
  std::cout << "wrote embeddings to " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uncertainty-guided class-imbalance learning on multi-view message graphs"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "generate a synthetic dataset bundle");
  generate->add_option("--preset", gen.preset, "crisislex7|longtail10");
  generate->add_option("--config", gen.config_path, "generator config JSON");
  generate->add_option("--out", gen.out_dir, "output bundle directory")->required();
  generate->add_option("--seed", gen.seed, "generator seed")
      ->each([&gen](const std::string&) { gen.seed_set = true; });

  std::string train_data, train_config_path, train_out;
  ucil::TrainConfig config;
  std::string mode_str, policy_str;
  CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset bundle");
  train_cmd->add_option("--data", train_data, "dataset bundle directory")->required();
  train_cmd->add_option("--config", train_config_path, "training config JSON");
  train_cmd->add_option("--out", train_out, "output directory")->required();
  add_config_overrides(train_cmd, config, mode_str, policy_str);

  std::string eval_data, eval_ckpt, eval_split = "test", eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--data", eval_data, "dataset bundle directory")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test (default test)");
  eval_cmd->add_option("--out", eval_out, "output directory")->required();

  std::uint64_t cg_seed = 7;
  double cg_tol = 1e-4;
  CLI::App* check_cmd = app.add_subcommand("check-grad", "run the gradient verification suite");
  check_cmd->add_option("--seed", cg_seed, "suite seed");
  check_cmd->add_option("--tol", cg_tol, "relative tolerance");

  std::string exp_data, exp_ckpt, exp_out;
  CLI::App* export_cmd =
      app.add_subcommand("export-embeddings", "write per-view embeddings as CSV");
  export_cmd->add_option("--data", exp_data, "dataset bundle directory")->required();
  export_cmd->add_option("--checkpoint", exp_ckpt, "checkpoint file")->required();
  export_cmd->add_option("--out", exp_out, "output CSV path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return run_generate(gen);
    if (train_cmd->parsed()) {
      // config file (when given) is the base; explicit flags override it
      ucil::TrainConfig final_config =
          train_config_path.empty() ? ucil::TrainConfig{} : ucil::load_train_config(train_config_path);
      auto set = [&](const std::string& flag) { return train_cmd->count(flag) > 0; };
      if (set("--epochs")) final_config.epochs = config.epochs;
      if (set("--batch-size")) final_config.batch_size = config.batch_size;
      if (set("--embed-dim")) final_config.embed_dim = config.embed_dim;
      if (set("--edl-hidden")) final_config.edl_hidden = config.edl_hidden;
      if (set("--gnn-layers")) final_config.gnn_layers = config.gnn_layers;
      if (set("--beta")) final_config.beta = config.beta;
      if (set("--lambda1")) final_config.lambda1 = config.lambda1;
      if (set("--lambda2")) final_config.lambda2 = config.lambda2;
      if (set("--lambda3")) final_config.lambda3 = config.lambda3;
      if (set("--learning-rate")) final_config.learning_rate = config.learning_rate;
      if (set("--seed")) final_config.seed = config.seed;
      if (!mode_str.empty())
        final_config.prototype_mode = ucil::prototype_mode_from_name(mode_str);
      if (!policy_str.empty())
        final_config.margin_policy = ucil::margin_policy_from_name(policy_str);
      return run_train(train_data, train_out, final_config);
    }
    if (eval_cmd->parsed()) return run_eval(eval_data, eval_ckpt, eval_split, eval_out);
    if (check_cmd->parsed()) return run_check_grad(cg_seed, cg_tol);
    if (export_cmd->parsed()) return run_export(exp_data, exp_ckpt, exp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
