// mrsmil: synthesize data, cross-validate MIL models, sweep bag sizes and
// export attention weights.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration/validation failure.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrsmil/mrsmil.hpp"

namespace fs = std::filesystem;
using namespace mrsmil;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

data::SynthConfig load_synth_config(const std::string& path) {
  try {
    auto config = read_json_file(path).get<data::SynthConfig>();
    config.validate();
    return config;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("invalid synthetic config '" + path + "': " + e.what());
  }
}

// `.json` paths are synthetic-data configs, anything else a spectra CSV.
std::vector<data::PatientRecord> load_dataset(const std::string& path) {
  if (path.empty()) throw ConfigError("--data is required");
  if (!fs::exists(path)) throw ConfigError("data source '" + path + "' does not exist");
  if (fs::path(path).extension() == ".json") return data::synthesize_dataset(load_synth_config(path));
  try {
    return data::load_csv(path);
  } catch (const ParseError& e) {
    throw ConfigError("'" + path + "' line " + std::to_string(e.line()) + ": " + e.what());
  }
}

struct RunFlags {
  std::string arch = "mlp";
  std::string agg = "three_pool";
  std::size_t n_att = 8;
  pipeline::RunConfig run;
  CLI::Option* bag_size_option = nullptr;
};

void add_run_flags(CLI::App& cmd, RunFlags& f) {
  cmd.add_option("--arch", f.arch, "Instance encoder: mlp, hatami or inception")->capture_default_str();
  cmd.add_option("--agg", f.agg, "Aggregator: si, three_pool or attention")->capture_default_str();
  f.bag_size_option =
      cmd.add_option("--bag-size", f.run.model.bag_size, "Spectra per bag (M); si implies 1")->capture_default_str();
  cmd.add_option("--n-att", f.n_att, "Attention hidden size")->capture_default_str();
  cmd.add_option("--da", f.run.da_factor, "Augmentation factor, 0 disables")->capture_default_str();
  cmd.add_option("--epochs", f.run.epochs)->capture_default_str();
  cmd.add_option("--batch", f.run.batch_size, "Bags per mini-batch")->capture_default_str();
  cmd.add_option("--lr", f.run.learning_rate, "Adam learning rate")->capture_default_str();
  cmd.add_option("--folds", f.run.folds)->capture_default_str();
  cmd.add_option("--seed", f.run.seed)->capture_default_str();
  cmd.add_option("--data", f.run.data, "Spectra CSV or synthetic-data JSON config")->required();
  cmd.add_option("--out", f.run.out_dir, "Output directory")->required();
  cmd.add_option("--jobs", f.run.jobs, "Folds trained in parallel")->capture_default_str();
}

pipeline::RunConfig finish_run_config(RunFlags& f) {
  auto run = f.run;
  run.model.architecture = models::parse_architecture(f.arch);
  run.model.aggregator = pooling::parse_aggregator(f.agg);
  run.model.n_att = f.n_att;
  // The single-instance pathway always uses M = 1 unless a conflicting size was asked for.
  if (run.model.aggregator == pooling::AggregatorKind::single_instance && f.bag_size_option->count() == 0) {
    run.model.bag_size = 1;
  }
  run.validate();
  return run;
}

void print_dataset_summary(const std::vector<data::PatientRecord>& patients, std::ostream& os) {
  std::size_t tumor = 0;
  std::map<std::size_t, std::size_t> histogram;  // bucket of 5 spectra -> patients
  for (const auto& p : patients) {
    tumor += p.label == data::Label::tumor;
    ++histogram[(p.spectra.size() - 1) / 5];
  }
  os << "patients: " << patients.size() << " (tumor " << tumor << ", non_tumor " << patients.size() - tumor
     << ")\nspectra:  " << data::total_spectra(patients) << "\nspectra per patient:\n";
  for (const auto& [bucket, count] : histogram) {
    os << "  " << bucket * 5 + 1 << "-" << bucket * 5 + 5 << "\t" << count << "\n";
  }
}

int cmd_synth(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed) {
  data::SynthConfig config = config_path.empty() ? data::SynthConfig{} : load_synth_config(config_path);
  if (seed) config.seed = *seed;
  config.validate();
  {
    std::ofstream probe(out, std::ios::binary);
    if (!probe) throw ConfigError("cannot write '" + out + "'");
  }
  const auto patients = data::synthesize_dataset(config);
  data::write_csv(out, patients);
  print_dataset_summary(patients, std::cout);
  return 0;
}

int cmd_train(RunFlags& flags) {
  const auto run = finish_run_config(flags);
  const fs::path out(run.out_dir);
  pipeline::prepare_output_dir(out);
  const auto patients = load_dataset(run.data);
  const auto cv = pipeline::cross_validate(patients, run, [&](const pipeline::FoldResult& fold) {
    pipeline::write_fold_outputs(out, fold, run);
    std::cout << "fold " << fold.fold << ": bag_auc " << fold.report.bag_auc << ", patient_auc "
              << fold.report.patient_auc << " (best epoch " << fold.best_epoch << ")\n";
  });
  pipeline::write_json(out / "aggregate.json", pipeline::aggregate_report_json(cv, run));
  for (const auto& [name, m] : cv.summary) std::cout << name << ": " << m.mean << " +- " << m.stddev << "\n";
  return 0;
}

int cmd_sweep(RunFlags& flags, std::vector<std::size_t> sizes) {
  const auto run = finish_run_config(flags);
  if (sizes.empty()) sizes = pipeline::bag_size_range(1, 51, 5);
  const fs::path out(run.out_dir);
  pipeline::prepare_output_dir(out);
  const auto patients = load_dataset(run.data);
  const auto rows = pipeline::sweep_bag_sizes(patients, run, sizes, [](const pipeline::SweepRow& r) {
    std::cout << "M=" << r.bag_size << ": bag_auc " << r.bag_auc.mean << " +- " << r.bag_auc.stddev << "\n";
  });
  pipeline::write_text(out / "sweep.csv", pipeline::sweep_csv(rows));
  return 0;
}

int cmd_attention(const std::string& checkpoint, const std::string& data_path, const std::string& out) {
  if (!fs::exists(checkpoint)) throw ConfigError("checkpoint '" + checkpoint + "' does not exist");
  auto loaded = models::load_checkpoint(checkpoint);
  if (loaded.model.aggregator().kind() != pooling::AggregatorKind::attention) {
    throw UnsupportedError("checkpoint '" + checkpoint + "' uses the " +
                           pooling::to_string(loaded.model.aggregator().kind()) +
                           " aggregator; attention export needs an attention model");
  }
  const auto patients = load_dataset(data_path);
  const auto rows = pipeline::export_attention(loaded.model, patients);
  pipeline::write_text(out, pipeline::attention_csv(rows));
  std::cout << "wrote " << rows.size() << " attention weights to " << out << "\n";
  return 0;
}

int cmd_summary(const std::string& arch, const std::string& agg, std::size_t bag_size, std::size_t n_att,
                bool as_json) {
  models::ModelConfig config;
  config.architecture = models::parse_architecture(arch);
  config.aggregator = pooling::parse_aggregator(agg);
  config.bag_size = config.aggregator == pooling::AggregatorKind::single_instance ? 1 : bag_size;
  config.n_att = n_att;
  const auto model = models::build_model(config);
  if (as_json) {
    std::cout << nlohmann::json{{"model_config", config}, {"summary", model.summary()}}.dump(2) << "\n";
  } else {
    model.summary().print(std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-instance learning on MR spectra"};
  app.require_subcommand(1);

  std::string synth_config;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth = app.add_subcommand("synth", "Write a synthetic spectra CSV");
  synth->add_option("--config", synth_config, "Synthetic-data JSON config (defaults if omitted)");
  synth->add_option("--out", synth_out, "Output CSV path")->required();
  synth->add_option("--seed", synth_seed, "Overrides the config seed");

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Cross-validate a model");
  add_run_flags(*train, train_flags);

  RunFlags sweep_flags;
  std::vector<std::size_t> sweep_sizes;
  auto* sweep = app.add_subcommand("sweep", "Cross-validate over several bag sizes");
  add_run_flags(*sweep, sweep_flags);
  sweep->add_option("--sizes", sweep_sizes, "Bag sizes (default 1,6,...,51)")->delimiter(',');

  std::string att_checkpoint;
  std::string att_data;
  std::string att_out = "attention.csv";
  auto* attention = app.add_subcommand("attention", "Export attention weights of test-time bags");
  attention->add_option("--checkpoint", att_checkpoint)->required();
  attention->add_option("--data", att_data, "Spectra CSV or synthetic-data JSON config")->required();
  attention->add_option("--out", att_out)->capture_default_str();

  std::string sum_arch = "mlp";
  std::string sum_agg = "three_pool";
  std::size_t sum_bag = 31;
  std::size_t sum_n_att = 8;
  bool sum_json = false;
  auto* summary = app.add_subcommand("summary", "Print layer shapes and parameter counts");
  summary->add_option("--arch", sum_arch)->capture_default_str();
  summary->add_option("--agg", sum_agg)->capture_default_str();
  summary->add_option("--bag-size", sum_bag)->capture_default_str();
  summary->add_option("--n-att", sum_n_att)->capture_default_str();
  summary->add_flag("--json", sum_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(synth_config, synth_out, synth_seed);
    if (*train) return cmd_train(train_flags);
    if (*sweep) return cmd_sweep(sweep_flags, sweep_sizes);
    if (*attention) return cmd_attention(att_checkpoint, att_data, att_out);
    if (*summary) return cmd_summary(sum_arch, sum_agg, sum_bag, sum_n_att, sum_json);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
