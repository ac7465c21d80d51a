// symcor command-line front end: Datalog queries, preimage inversion,
// training/evaluation drivers, the xor demonstration and heatmap export.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "symcor/datalog.hpp"
#include "symcor/preimage.hpp"
#include "symcor/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

constexpr const char* kSynopsis =
    "usage: symcor <datalog|invert|train|eval|xor-demo|heatmap> [options]";

// Candidate display: one `rel=args` token per group, e.g. `digit1=0 digit2=0`.
std::string candidate_text(const symcor::datalog::Program& program, const symcor::GroupSpec& spec,
                           const symcor::datalog::Bitstring& bits) {
  std::string out;
  for (size_t gi = 0; gi < spec.groups.size(); ++gi) {
    for (uint32_t idx : spec.groups[gi]) {
      if (!bits[idx]) continue;
      const symcor::datalog::Fact& fact = program.input_enum()[idx];
      if (gi) out += ' ';
      out += program.relations()[fact.relation].name;
      out += '=';
      for (size_t a = 0; a < fact.args.size(); ++a) {
        if (a) out += ':';
        out += std::to_string(fact.args[a]);
      }
    }
  }
  return out;
}

int cmd_datalog_eval(const std::string& program_path, const std::string& bits_text) {
  const symcor::datalog::Program program = symcor::datalog::parse_program_file(program_path);
  const symcor::datalog::Bitstring input = symcor::datalog::bits_from_string(bits_text);
  const symcor::datalog::Bitstring out = program.evaluate(input);
  for (size_t j = 0; j < out.size(); ++j)
    if (out[j]) std::cout << program.atom_text(program.output_enum()[j]) << '\n';
  return kExitOk;
}

int cmd_invert(const std::string& program_path, size_t label) {
  const symcor::datalog::Program program = symcor::datalog::parse_program_file(program_path);
  const symcor::GroupSpec spec = symcor::GroupSpec::from_program(program);
  const symcor::AssignmentTable table(program, spec);
  const symcor::PreimageSet ps = symcor::enumerate_preimage(table, label);
  for (const auto& candidate : ps.candidates)
    std::cout << candidate_text(program, spec, candidate) << '\n';
  return kExitOk;
}

void write_reports(const symcor::ExperimentConfig& cfg,
                   const std::vector<symcor::RunReport>& reports) {
  std::filesystem::create_directories(cfg.output_dir);
  const std::string report_path = cfg.output_dir + "/report.csv";
  std::ofstream report_file(report_path, std::ios::trunc);
  if (!report_file) throw std::runtime_error("cannot open " + report_path);
  symcor::write_run_reports_csv(reports, report_file);
  for (const symcor::RunReport& r : reports) {
    const std::string path = cfg.output_dir + "/confusion_" + std::to_string(r.seed) + ".csv";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path);
    symcor::write_confusion_csv(r.confusion, f);
  }
  std::cout << "wrote " << report_path << " and " << reports.size()
            << " confusion matrices\n";
}

int cmd_train(const std::string& config_path, const std::string& out_dir, int parallel_seeds) {
  symcor::ExperimentConfig cfg = symcor::load_experiment_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const symcor::datalog::Program program = symcor::load_task_program(cfg);
  const std::vector<symcor::RunReport> reports =
      symcor::run_experiment(cfg, program, parallel_seeds);
  for (const symcor::RunReport& r : reports)
    std::cout << "seed " << r.seed << ": epoch " << r.epoch_selected << ", output_acc "
              << r.output_acc << ", symbol_acc " << r.symbol_acc << '\n';
  write_reports(cfg, reports);
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path) {
  symcor::ExperimentConfig cfg = symcor::load_experiment_config(config_path);
  const symcor::datalog::Program program = symcor::load_task_program(cfg);
  const symcor::GroupSpec spec = symcor::GroupSpec::from_program(program);
  const symcor::AssignmentTable table(program, spec);
  const symcor::Dataset test = symcor::build_test_dataset(cfg);
  symcor::check_dataset_consistency(program, spec, test);

  symcor::NetworkConfig ncfg;
  ncfg.image_height = test.pool.at(0).height;
  ncfg.image_width = test.pool.at(0).width;
  ncfg.pair_arity = static_cast<uint32_t>(spec.group_count());
  ncfg.classes_per_group = static_cast<uint32_t>(spec.groups[0].size());
  ncfg.hidden_sizes = cfg.hidden_sizes;
  const symcor::Network net = symcor::load_checkpoint(ncfg, checkpoint_path);

  const symcor::EvalResult ev = symcor::evaluate_model(net, table, test);
  std::cout << "output_acc " << ev.output_acc << '\n';
  std::cout << "symbol_acc " << ev.symbol_acc << '\n';
  return kExitOk;
}

int cmd_xor_demo() {
  const symcor::XorReport report = symcor::xor_demo();
  for (const std::string& line : report.lines) std::cout << line << '\n';
  std::cout << "output correct " << report.output_correct << "/" << report.total << '\n';
  std::cout << "symbol correct " << report.symbol_correct << "/" << report.total << '\n';
  return kExitOk;
}

int cmd_heatmap(const std::string& report_path, const std::string& out_path) {
  std::ifstream in(report_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open report: " + report_path);
  if (out_path.empty()) {
    symcor::normalize_confusion_csv(in, std::cout);
  } else {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    symcor::normalize_confusion_csv(in, out);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neurosymbolic training with Datalog symbolic layers"};
  app.require_subcommand(1);

  // datalog eval <program> <bits>
  CLI::App* datalog_cmd = app.add_subcommand("datalog", "Datalog program queries");
  datalog_cmd->require_subcommand(1);
  CLI::App* datalog_eval = datalog_cmd->add_subcommand("eval", "evaluate a program on input bits");
  std::string dl_program, dl_bits;
  datalog_eval->add_option("program", dl_program, "Datalog program file")->required();
  datalog_eval->add_option("bits", dl_bits, "0/1 string in input enumeration order")->required();

  // invert <program> <label>
  CLI::App* invert = app.add_subcommand("invert", "enumerate the preimage of an output label");
  std::string inv_program;
  size_t inv_label = 0;
  invert->add_option("program", inv_program, "Datalog program file")->required();
  invert->add_option("label", inv_label, "output enumeration index")->required();

  // train --config <file> [--out dir] [--parallel-seeds k]
  CLI::App* train = app.add_subcommand("train", "run seeded training runs, write CSV reports");
  std::string train_config, train_out;
  int parallel_seeds = 1;
  train->add_option("--config", train_config, "experiment config JSON")->required();
  train->add_option("--out", train_out, "output directory (overrides config)");
  train->add_option("--parallel-seeds", parallel_seeds, "worker threads for independent seeds")
      ->check(CLI::PositiveNumber);

  // eval --checkpoint <file> --config <file>
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the config's test set");
  std::string eval_checkpoint, eval_config;
  eval->add_option("--checkpoint", eval_checkpoint, "network checkpoint")->required();
  eval->add_option("--config", eval_config, "experiment config JSON")->required();

  // xor-demo
  CLI::App* xor_cmd = app.add_subcommand("xor-demo", "output-correct-but-not-symbol-correct demo");

  // heatmap --report <csv> [--out file]
  CLI::App* heatmap = app.add_subcommand("heatmap", "normalize a confusion CSV");
  std::string heat_report, heat_out;
  heatmap->add_option("--report", heat_report, "confusion CSV")->required();
  heatmap->add_option("--out", heat_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n' << kSynopsis << '\n';
    return kExitUsage;
  }

  try {
    if (datalog_eval->parsed()) return cmd_datalog_eval(dl_program, dl_bits);
    if (invert->parsed()) return cmd_invert(inv_program, inv_label);
    if (train->parsed()) {
      // A missing config file is a usage error; malformed content is a data error.
      if (!std::filesystem::exists(train_config)) {
        std::cerr << "config file not found: " << train_config << '\n' << kSynopsis << '\n';
        return kExitUsage;
      }
      return cmd_train(train_config, train_out, parallel_seeds);
    }
    if (eval->parsed()) {
      if (!std::filesystem::exists(eval_config)) {
        std::cerr << "config file not found: " << eval_config << '\n' << kSynopsis << '\n';
        return kExitUsage;
      }
      return cmd_eval(eval_checkpoint, eval_config);
    }
    if (xor_cmd->parsed()) return cmd_xor_demo();
    if (heatmap->parsed()) return cmd_heatmap(heat_report, heat_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  std::cerr << kSynopsis << '\n';
  return kExitUsage;
}
