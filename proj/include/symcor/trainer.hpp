#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "symcor/dataset.hpp"
#include "symcor/network.hpp"
#include "symcor/prob_eval.hpp"
#include "symcor/synthesizer.hpp"

namespace symcor {

struct MnistPaths {
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;
};

struct ExperimentConfig {
  enum class DatasetKind { Synthetic, Mnist };

  DatasetKind dataset = DatasetKind::Synthetic;
  double noise_rate = 0.05;  // synthetic only
  MnistPaths mnist;

  size_t train_size = 2000;
  size_t test_size = 500;
  size_t batch_size = 16;
  int epochs = 15;
  double learning_rate = 1e-4;

  std::vector<uint64_t> seeds = {1};  // one training run per seed
  uint64_t data_seed = 12345;         // data is shared across seeds

  SynthesizerKind synthesizer = SynthesizerKind::Ideal;
  AnnealSchedule anneal;
  PairingPolicy pairing = PairingPolicy::Uniform;  // applies to train and test
  double replacement_fraction = 0.1;               // same-digit MNIST pairing

  std::string checkpoint;  // optional initial weights (see configs/exp2_synthetic.json)
  // Optional path to save each run's selected model; must contain "{seed}"
  // when training more than one seed.
  std::string save_checkpoint_path;
  std::vector<uint32_t> hidden_sizes = {128, 64};
  std::string program_path;  // empty: built-in addition program
  bool trace_pseudolabels = false;
  std::string output_dir = ".";

  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

// The visual-addition program (also shipped as programs/addition.dl) and its
// saturating-subtraction sibling for the transfer property.
const char* builtin_addition_source();
const char* builtin_subtraction_source();

datalog::Program load_task_program(const ExperimentConfig& config);

Dataset build_train_dataset(const ExperimentConfig& config);
Dataset build_test_dataset(const ExperimentConfig& config);

// Throws unless every sample satisfies evaluate(p, α_x)[y] = 1.
void check_dataset_consistency(const datalog::Program& program, const GroupSpec& spec,
                               const Dataset& ds);

struct EvalResult {
  double output_acc = 0.0;
  double symbol_acc = 0.0;
  // True digit class (rows) vs predicted class (columns), pooled over both
  // pair positions.
  std::array<std::array<int64_t, 10>, 10> confusion{};
};

// Output correct: evaluate(p, g(f(x)))[y] = 1; symbol correct: g(f(x)) = α_x.
// Every evaluated point also feeds the process-wide implication audit.
EvalResult evaluate_model(const Network& net, const AssignmentTable& table, const Dataset& ds);

// Implication audit: symbol-correct points must be output correct. Counters
// accumulate over every evaluate_model call in the process.
uint64_t implication_points_checked();
uint64_t implication_violations();

struct RunReport {
  uint64_t seed = 0;
  SynthesizerKind synthesizer = SynthesizerKind::Ideal;
  std::vector<double> epoch_train_acc;  // training output accuracy per epoch
  int epoch_selected = 0;               // 1-based; 0 means the initial model
  double output_acc = 0.0;
  double symbol_acc = 0.0;
  double pseudolabel_stability = 1.0;
  std::array<std::array<int64_t, 10>, 10> confusion{};
};

// One seeded training run: forward → synthesize → backward → adam_step per
// batch, snapshot of the best-training-accuracy epoch, final evaluation.
RunReport train_one(const ExperimentConfig& config, const datalog::Program& program,
                    uint64_t seed);

// All configured seeds against shared data; runs are independent and may be
// spread over parallel_seeds worker threads without changing any result.
std::vector<RunReport> run_experiment(const ExperimentConfig& config,
                                      const datalog::Program& program, int parallel_seeds = 1);

void write_run_reports_csv(const std::vector<RunReport>& reports, std::ostream& out);
void write_confusion_csv(const std::array<std::array<int64_t, 10>, 10>& confusion,
                         std::ostream& out);
// Heatmap export: rows of a confusion CSV normalized to sum 1.
void normalize_confusion_csv(std::istream& in, std::ostream& out);

struct XorReport {
  size_t total = 0;
  size_t output_correct = 0;
  size_t symbol_correct = 0;
  std::vector<std::string> lines;  // per-point summary for display
};

// Example of a model that is output correct everywhere yet never symbol
// correct: 2-bit xor with a hand-built network computing ¬α_x.
XorReport xor_demo();

}  // namespace symcor
