#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "symcor/trainer.hpp"

using namespace symcor;
using symcor::datalog::Bitstring;
using symcor::datalog::Program;

namespace {

// Template matcher: logit[c] = −Hamming(x, glyph_{map(c)}), which classifies
// noise-free glyphs perfectly (or onto a chosen permutation of the classes).
Network template_net(const std::array<int, 10>& map) {
  NetworkConfig ncfg;
  ncfg.hidden_sizes = {};
  Network net;
  net.config = ncfg;
  Network::Layer layer;
  layer.in = 256;
  layer.out = 10;
  layer.w.assign(10 * 256, 0.0);
  layer.b.assign(10, 0.0);
  const auto& glyphs = digit_glyphs();
  for (int c = 0; c < 10; ++c) {
    double on = 0.0;
    for (size_t i = 0; i < 256; ++i) {
      const double g = glyphs[static_cast<size_t>(map[c])].pixels[i];
      layer.w[static_cast<size_t>(c) * 256 + i] = 2.0 * g - 1.0;
      on += g;
    }
    layer.b[static_cast<size_t>(c)] = -on;
  }
  net.layers.push_back(std::move(layer));
  return net;
}

constexpr std::array<int, 10> kIdentity = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
// Adjacent-swap permutation: every class maps to a different one, and exactly
// half of all digit pairs keep their sum (one +1 with one −1).
constexpr std::array<int, 10> kSwapped = {1, 0, 3, 2, 5, 4, 7, 6, 9, 8};

AssignmentTable table_for(const char* source) {
  Program p = datalog::parse_program(source);
  GroupSpec spec = GroupSpec::from_program(p);
  return AssignmentTable(std::move(p), std::move(spec), AssignmentTable::Build::Serial);
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.train_size = 48;
  cfg.test_size = 24;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.noise_rate = 0.05;
  cfg.hidden_sizes = {16};
  cfg.seeds = {1};
  return cfg;
}

std::filesystem::path temp_dir(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults and parsing") {
  const ExperimentConfig cfg = parse_experiment_config("{}");
  CHECK(cfg.dataset == ExperimentConfig::DatasetKind::Synthetic);
  CHECK(cfg.noise_rate == doctest::Approx(0.05));
  CHECK(cfg.train_size == 2000);
  CHECK(cfg.test_size == 500);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.epochs == 15);
  CHECK(cfg.learning_rate == doctest::Approx(1e-4));
  CHECK(cfg.seeds == std::vector<uint64_t>{1});
  CHECK(cfg.data_seed == 12345);
  CHECK(cfg.synthesizer == SynthesizerKind::Ideal);
  CHECK(cfg.anneal.warm_epochs == 10);
  CHECK(cfg.anneal.gamma == doctest::Approx(0.5));
  CHECK(cfg.pairing == PairingPolicy::Uniform);
  CHECK(cfg.hidden_sizes == std::vector<uint32_t>{128, 64});
  CHECK(cfg.program_path.empty());
  CHECK(cfg.output_dir == ".");

  const ExperimentConfig full = parse_experiment_config(R"({
    "dataset": "synthetic", "noise_rate": 0.1, "train_size": 100, "test_size": 50,
    "batch_size": 4, "epochs": 3, "learning_rate": 0.001, "seeds": [5, 6],
    "data_seed": 99, "synthesizer": "random", "anneal": {"warm_epochs": 2, "gamma": 0.25},
    "pairing": "same-digit", "replacement_fraction": 0.2, "checkpoint": "w.symc",
    "save_checkpoint": "out/{seed}.symc",
    "hidden_sizes": [32, 16], "program": "programs/addition.dl",
    "trace_pseudolabels": true, "output_dir": "runs/x"
  })");
  CHECK(full.noise_rate == doctest::Approx(0.1));
  CHECK(full.seeds == std::vector<uint64_t>{5, 6});
  CHECK(full.synthesizer == SynthesizerKind::Random);
  CHECK(full.anneal.warm_epochs == 2);
  CHECK(full.anneal.gamma == doctest::Approx(0.25));
  CHECK(full.pairing == PairingPolicy::SameDigit);
  CHECK(full.replacement_fraction == doctest::Approx(0.2));
  CHECK(full.checkpoint == "w.symc");
  CHECK(full.save_checkpoint_path == "out/{seed}.symc");
  CHECK(full.hidden_sizes == std::vector<uint32_t>{32, 16});
  CHECK(full.program_path == "programs/addition.dl");
  CHECK(full.trace_pseudolabels);
  CHECK(full.output_dir == "runs/x");
}

TEST_CASE("config rejects unknown keys and invalid values") {
  CHECK_THROWS(parse_experiment_config(R"({"trainsize": 10})"));
  CHECK_THROWS(parse_experiment_config(R"({"mnist": {"train": "x"}})"));
  CHECK_THROWS(parse_experiment_config(R"({"anneal": {"warmth": 1}})"));
  CHECK_THROWS(parse_experiment_config(R"({"dataset": "cifar"})"));
  CHECK_THROWS(parse_experiment_config(R"({"batch_size": 0})"));
  CHECK_THROWS(parse_experiment_config(R"({"epochs": -1})"));
  CHECK_THROWS(parse_experiment_config(R"({"noise_rate": 0.4})"));
  CHECK_THROWS(parse_experiment_config(R"({"seeds": []})"));
  CHECK_THROWS(parse_experiment_config(R"({"hidden_sizes": [0]})"));
  CHECK_THROWS(parse_experiment_config(R"({"learning_rate": 0})"));
  CHECK_THROWS(parse_experiment_config(R"({"anneal": {"gamma": 0}})"));
  CHECK_THROWS(parse_experiment_config(R"({"replacement_fraction": 1.5})"));
  // Saving several seeds to one file is ambiguous without a placeholder.
  CHECK_THROWS(parse_experiment_config(R"({"seeds": [1, 2], "save_checkpoint": "m.symc"})"));
  CHECK_NOTHROW(parse_experiment_config(R"({"seeds": [1, 2], "save_checkpoint": "m_{seed}.symc"})"));
  CHECK_NOTHROW(parse_experiment_config(R"({"seeds": [7], "save_checkpoint": "m.symc"})"));
  CHECK_THROWS(parse_experiment_config(R"({"dataset": "mnist"})"));
  CHECK_THROWS(parse_experiment_config("[1,2]"));
  CHECK_THROWS(parse_experiment_config("not json"));
  CHECK_THROWS(load_experiment_config("/nonexistent/config.json"));
}

TEST_CASE("builtin programs parse to the documented shapes") {
  const Program add = datalog::parse_program(builtin_addition_source());
  CHECK(add.n_inputs() == 20);
  CHECK(add.n_outputs() == 19);
  const Program sub = datalog::parse_program(builtin_subtraction_source());
  CHECK(sub.n_inputs() == 20);
  CHECK(sub.n_outputs() == 10);

  ExperimentConfig cfg;
  CHECK(load_task_program(cfg).digest() == add.digest());
  cfg.program_path = std::string(SYMCOR_SOURCE_DIR) + "/programs/subtraction.dl";
  CHECK(load_task_program(cfg).digest() == sub.digest());
}

TEST_CASE("dataset builders honor the data seed and pass consistency") {
  ExperimentConfig cfg = small_config();
  const Program p = load_task_program(cfg);
  const GroupSpec spec = GroupSpec::from_program(p);
  const Dataset train = build_train_dataset(cfg);
  const Dataset test = build_test_dataset(cfg);
  CHECK(train.size() == 48);
  CHECK(test.size() == 24);
  CHECK_NOTHROW(check_dataset_consistency(p, spec, train));
  CHECK_NOTHROW(check_dataset_consistency(p, spec, test));

  // Train and test derive from different salts of the same data_seed.
  bool differs = false;
  for (size_t i = 0; i < test.size(); ++i)
    differs |= train.samples[i].cls != test.samples[i].cls;
  CHECK(differs);

  Dataset corrupted = train;
  corrupted.samples[3].label = (corrupted.samples[3].label + 1) % 19;
  CHECK_THROWS(check_dataset_consistency(p, spec, corrupted));
  corrupted = train;
  corrupted.samples[0].alpha[0] ^= 1;
  CHECK_THROWS(check_dataset_consistency(p, spec, corrupted));
}

TEST_CASE("evaluate_model scores a perfect template matcher at 1.0") {
  const AssignmentTable table = table_for(builtin_addition_source());
  const Dataset ds = generate_synthetic_dataset(200, 21, 0.0, PairingPolicy::Uniform);
  const Network net = template_net(kIdentity);
  const EvalResult ev = evaluate_model(net, table, ds);
  CHECK(ev.output_acc == 1.0);
  CHECK(ev.symbol_acc == 1.0);
  // Confusion concentrates on the diagonal with 2·200 total counts.
  int64_t diag = 0, total = 0;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) {
      total += ev.confusion[r][c];
      if (r == c) diag += ev.confusion[r][c];
    }
  CHECK(total == 400);
  CHECK(diag == 400);
}

TEST_CASE("evaluate_model on a permuted model: output-correct, symbol-wrong") {
  const AssignmentTable table = table_for(builtin_addition_source());
  const Dataset ds = generate_synthetic_dataset(400, 22, 0.0, PairingPolicy::Uniform);
  const Network net = template_net(kSwapped);
  const EvalResult ev = evaluate_model(net, table, ds);

  // The model never reads the true symbol...
  CHECK(ev.symbol_acc == 0.0);
  // ...but keeps the sum whenever the pair mixes parities; count it directly.
  size_t preserved = 0;
  for (const Sample& s : ds.samples)
    if (kSwapped[s.cls[0]] + kSwapped[s.cls[1]] == static_cast<int>(s.label)) ++preserved;
  CHECK(ev.output_acc ==
        doctest::Approx(static_cast<double>(preserved) / static_cast<double>(ds.size()))
            .epsilon(1e-12));
  CHECK(ev.output_acc > 0.3);
  CHECK(ev.output_acc < 0.7);

  // Every digit lands on its swap partner.
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c)
      if (c != kSwapped[r]) CHECK(ev.confusion[r][c] == 0);
}

TEST_CASE("implication audit accumulates points and stays violation-free") {
  const uint64_t points_before = implication_points_checked();
  const uint64_t violations_before = implication_violations();
  const AssignmentTable table = table_for(builtin_addition_source());
  const Dataset ds = generate_synthetic_dataset(120, 23, 0.1, PairingPolicy::Uniform);
  evaluate_model(template_net(kIdentity), table, ds);
  evaluate_model(template_net(kSwapped), table, ds);
  CHECK(implication_points_checked() == points_before + 240);
  CHECK(implication_violations() == violations_before);
}

TEST_CASE("transfer: relabeling under another program keeps symbol accuracy") {
  const AssignmentTable add = table_for(builtin_addition_source());
  const AssignmentTable sub = table_for(builtin_subtraction_source());

  Dataset ds = generate_synthetic_dataset(300, 31, 0.0, PairingPolicy::Uniform);
  Dataset relabeled = ds;
  for (Sample& s : relabeled.samples)
    s.label = s.cls[0] >= s.cls[1] ? static_cast<uint32_t>(s.cls[0] - s.cls[1]) : 0;
  check_dataset_consistency(sub.program(), sub.spec(), relabeled);

  // Perfect interface: symbol accuracy 1.0 under both programs.
  const Network good = template_net(kIdentity);
  CHECK(evaluate_model(good, add, ds).symbol_acc == 1.0);
  CHECK(evaluate_model(good, sub, relabeled).symbol_acc == 1.0);
  CHECK(evaluate_model(good, sub, relabeled).output_acc == 1.0);

  // Permuted interface: symbol accuracy 0 under both, output accuracy is
  // program-dependent and matches a direct count.
  const Network bad = template_net(kSwapped);
  const EvalResult ev_add = evaluate_model(bad, add, ds);
  const EvalResult ev_sub = evaluate_model(bad, sub, relabeled);
  CHECK(ev_add.symbol_acc == 0.0);
  CHECK(ev_sub.symbol_acc == 0.0);
  size_t preserved = 0;
  for (const Sample& s : relabeled.samples) {
    const int a = kSwapped[s.cls[0]], b = kSwapped[s.cls[1]];
    if ((a >= b ? a - b : 0) == static_cast<int>(s.label)) ++preserved;
  }
  CHECK(ev_sub.output_acc ==
        doctest::Approx(static_cast<double>(preserved) / static_cast<double>(relabeled.size()))
            .epsilon(1e-12));
  CHECK(ev_add.output_acc != ev_sub.output_acc);
}

TEST_CASE("train_one produces a sane, deterministic report") {
  const ExperimentConfig cfg = small_config();
  const Program program = load_task_program(cfg);
  const RunReport a = train_one(cfg, program, 5);
  const RunReport b = train_one(cfg, program, 5);

  CHECK(a.seed == 5);
  CHECK(a.synthesizer == SynthesizerKind::Ideal);
  REQUIRE(a.epoch_train_acc.size() == 2);
  CHECK(a.epoch_selected >= 1);
  CHECK(a.epoch_selected <= 2);
  for (double acc : a.epoch_train_acc) {
    CHECK(acc >= 0.0);
    CHECK(acc <= 1.0);
  }
  CHECK(a.pseudolabel_stability == 1.0);

  CHECK(a.epoch_train_acc == b.epoch_train_acc);
  CHECK(a.epoch_selected == b.epoch_selected);
  CHECK(a.output_acc == b.output_acc);
  CHECK(a.symbol_acc == b.symbol_acc);
  CHECK(a.confusion == b.confusion);

  const RunReport c = train_one(cfg, program, 6);
  CHECK(c.seed == 6);
  bool differs = c.epoch_train_acc != a.epoch_train_acc || c.output_acc != a.output_acc ||
                 c.symbol_acc != a.symbol_acc;
  CHECK(differs);
}

TEST_CASE("train_one with zero epochs evaluates the initial model") {
  ExperimentConfig cfg = small_config();
  cfg.epochs = 0;
  const Program program = load_task_program(cfg);
  const RunReport r = train_one(cfg, program, 3);
  CHECK(r.epoch_selected == 0);
  CHECK(r.epoch_train_acc.empty());
  CHECK(r.output_acc >= 0.0);
  CHECK(r.output_acc <= 1.0);
}

TEST_CASE("run_experiment is invariant to the worker thread count") {
  ExperimentConfig cfg = small_config();
  cfg.seeds = {1, 2, 3};
  const Program program = load_task_program(cfg);
  const std::vector<RunReport> serial = run_experiment(cfg, program, 1);
  const std::vector<RunReport> parallel = run_experiment(cfg, program, 3);
  REQUIRE(serial.size() == 3);
  REQUIRE(parallel.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(serial[i].seed == cfg.seeds[i]);
    CHECK(serial[i].epoch_train_acc == parallel[i].epoch_train_acc);
    CHECK(serial[i].epoch_selected == parallel[i].epoch_selected);
    CHECK(serial[i].output_acc == parallel[i].output_acc);
    CHECK(serial[i].symbol_acc == parallel[i].symbol_acc);
    CHECK(serial[i].pseudolabel_stability == parallel[i].pseudolabel_stability);
    CHECK(serial[i].confusion == parallel[i].confusion);
  }
}

TEST_CASE("training resumes from a checkpoint identically across run seeds") {
  ExperimentConfig cfg = small_config();
  const Program program = load_task_program(cfg);

  NetworkConfig ncfg;
  ncfg.hidden_sizes = cfg.hidden_sizes;
  const Network initial = init_network(ncfg, 777);
  const auto path = temp_dir("symcor_trainer") / "shared.symc";
  save_checkpoint(initial, path.string());
  cfg.checkpoint = path.string();

  // With the Ideal synthesizer nothing depends on the run seed once the
  // weights are pinned, so two different seeds give identical trajectories.
  const RunReport a = train_one(cfg, program, 1);
  const RunReport b = train_one(cfg, program, 2);
  CHECK(a.epoch_train_acc == b.epoch_train_acc);
  CHECK(a.output_acc == b.output_acc);
  CHECK(a.symbol_acc == b.symbol_acc);
  std::filesystem::remove(path);
}

TEST_CASE("train_one saves the selected model when asked") {
  ExperimentConfig cfg = small_config();
  const auto path = temp_dir("symcor_trainer") / "saved_{seed}.symc";
  cfg.save_checkpoint_path = path.string();
  const Program program = load_task_program(cfg);
  const RunReport report = train_one(cfg, program, 9);

  const auto resolved = temp_dir("symcor_trainer") / "saved_9.symc";
  REQUIRE(std::filesystem::exists(resolved));

  // The file holds the network that produced the report: evaluating it on the
  // same test set reproduces the reported accuracies bit for bit.
  NetworkConfig ncfg;
  ncfg.hidden_sizes = cfg.hidden_sizes;
  const Network net = load_checkpoint(ncfg, resolved.string());
  const GroupSpec spec = GroupSpec::from_program(program);
  const AssignmentTable table(program, spec);
  const EvalResult ev = evaluate_model(net, table, build_test_dataset(cfg));
  CHECK(ev.output_acc == report.output_acc);
  CHECK(ev.symbol_acc == report.symbol_acc);
  std::filesystem::remove(resolved);
}

TEST_CASE("random synthesizer run stays in range and traces pseudolabels") {
  ExperimentConfig cfg = small_config();
  cfg.synthesizer = SynthesizerKind::Random;
  cfg.anneal.warm_epochs = 1;
  cfg.trace_pseudolabels = true;
  cfg.output_dir = temp_dir("symcor_trace").string();
  const Program program = load_task_program(cfg);
  const RunReport r = train_one(cfg, program, 9);
  CHECK(r.pseudolabel_stability >= 0.0);
  CHECK(r.pseudolabel_stability <= 1.0);

  const auto trace_path = std::filesystem::path(cfg.output_dir) / "pseudolabels_9.csv";
  REQUIRE(std::filesystem::exists(trace_path));
  std::ifstream in(trace_path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "epoch,sample,psi");
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    const auto last_comma = line.rfind(',');
    const std::string psi = line.substr(last_comma + 1);
    CHECK(psi.size() == 20);
  }
  CHECK(rows == cfg.train_size * static_cast<size_t>(cfg.epochs));
  std::filesystem::remove(trace_path);
}

TEST_CASE("run report CSV freezes the documented format") {
  RunReport r1;
  r1.seed = 4;
  r1.synthesizer = SynthesizerKind::Closest;
  r1.epoch_selected = 11;
  r1.output_acc = 0.9875;
  r1.symbol_acc = 0.25;
  r1.pseudolabel_stability = 1.0 / 3.0;
  RunReport r2;
  r2.seed = 5;
  r2.synthesizer = SynthesizerKind::Random;
  r2.epoch_selected = 0;
  std::ostringstream out;
  write_run_reports_csv({r1, r2}, out);
  CHECK(out.str() ==
        "seed,synthesizer,epoch_selected,output_acc,symbol_acc,pseudolabel_stability\n"
        "4,closest,11,0.987500,0.250000,0.333333\n"
        "5,random,0,0.000000,0.000000,1.000000\n");
}

TEST_CASE("confusion CSV and heatmap normalization") {
  std::array<std::array<int64_t, 10>, 10> confusion{};
  confusion[0][0] = 3;
  confusion[0][9] = 1;
  confusion[9][9] = 2;
  std::ostringstream csv;
  write_confusion_csv(confusion, csv);
  std::istringstream lines(csv.str());
  std::string first;
  std::getline(lines, first);
  CHECK(first == "3,0,0,0,0,0,0,0,0,1");

  std::istringstream in(csv.str());
  std::ostringstream normalized;
  normalize_confusion_csv(in, normalized);
  std::istringstream nl(normalized.str());
  std::getline(nl, first);
  CHECK(first == "0.750000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,"
                 "0.000000,0.250000");
  std::string second;
  std::getline(nl, second);  // all-zero row normalizes to zeros
  CHECK(second ==
        "0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,0.000000,"
        "0.000000,0.000000");

  std::istringstream bad1("1,x,3\n");
  std::ostringstream sink;
  CHECK_THROWS(normalize_confusion_csv(bad1, sink));
  std::istringstream bad2("1,-2\n");
  CHECK_THROWS(normalize_confusion_csv(bad2, sink));
  std::istringstream bad3("");
  CHECK_THROWS(normalize_confusion_csv(bad3, sink));
}

TEST_CASE("xor demonstration separates output from symbol correctness") {
  const XorReport r = xor_demo();
  CHECK(r.total == 4);
  CHECK(r.output_correct == 4);
  CHECK(r.symbol_correct == 0);
  REQUIRE(r.lines.size() == 4);
  CHECK(r.lines[0] ==
        "input (0,0): predicted symbols (1,1), output 0, expected 0 -> output correct, "
        "symbol wrong");
  for (const std::string& line : r.lines) {
    CHECK(line.find("output correct") != std::string::npos);
    CHECK(line.find("symbol wrong") != std::string::npos);
  }
}
