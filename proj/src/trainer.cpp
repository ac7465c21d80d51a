#include "symcor/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "symcor/preimage.hpp"
#include "symcor/rng.hpp"

namespace symcor {

// ---------------------------------------------------------------------------
// Built-in task programs

const char* builtin_addition_source() {
  return R"(% Visual addition: two digit images, output fact is their sum.
input digit1/1.
input digit2/1.
output sum/1.

enum input:
  digit1(0), digit1(1), digit1(2), digit1(3), digit1(4),
  digit1(5), digit1(6), digit1(7), digit1(8), digit1(9),
  digit2(0), digit2(1), digit2(2), digit2(3), digit2(4),
  digit2(5), digit2(6), digit2(7), digit2(8), digit2(9);

enum output:
  sum(0), sum(1), sum(2), sum(3), sum(4), sum(5), sum(6),
  sum(7), sum(8), sum(9), sum(10), sum(11), sum(12), sum(13),
  sum(14), sum(15), sum(16), sum(17), sum(18);

sum(X+Y) <- digit1(X), digit2(Y).
)";
}

const char* builtin_subtraction_source() {
  return R"(% Visual subtraction: difference of the two digits, saturating at 0.
input digit1/1.
input digit2/1.
output diff/1.

enum input:
  digit1(0), digit1(1), digit1(2), digit1(3), digit1(4),
  digit1(5), digit1(6), digit1(7), digit1(8), digit1(9),
  digit2(0), digit2(1), digit2(2), digit2(3), digit2(4),
  digit2(5), digit2(6), digit2(7), digit2(8), digit2(9);

enum output:
  diff(0), diff(1), diff(2), diff(3), diff(4),
  diff(5), diff(6), diff(7), diff(8), diff(9);

diff(X-Y) <- digit1(X), digit2(Y).
)";
}

datalog::Program load_task_program(const ExperimentConfig& config) {
  if (config.program_path.empty()) return datalog::parse_program(builtin_addition_source());
  return datalog::parse_program_file(config.program_path);
}

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (train_size == 0 || test_size == 0) throw std::runtime_error("config: sizes must be positive");
  if (batch_size == 0) throw std::runtime_error("config: batch_size must be positive");
  if (epochs < 0) throw std::runtime_error("config: epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw std::runtime_error("config: learning_rate must be positive");
  if (seeds.empty()) throw std::runtime_error("config: seeds must be nonempty");
  if (!(noise_rate >= 0.0 && noise_rate <= 0.3))
    throw std::runtime_error("config: noise_rate must lie in [0, 0.3]");
  if (!(replacement_fraction >= 0.0 && replacement_fraction <= 1.0))
    throw std::runtime_error("config: replacement_fraction must lie in [0, 1]");
  if (anneal.warm_epochs < 0) throw std::runtime_error("config: warm_epochs must be non-negative");
  if (!(anneal.gamma > 0.0 && anneal.gamma <= 1.0))
    throw std::runtime_error("config: gamma must lie in (0, 1]");
  for (uint32_t h : hidden_sizes)
    if (h == 0) throw std::runtime_error("config: hidden layer sizes must be positive");
  if (dataset == DatasetKind::Mnist &&
      (mnist.train_images.empty() || mnist.train_labels.empty() || mnist.test_images.empty() ||
       mnist.test_labels.empty()))
    throw std::runtime_error("config: mnist dataset requires all four IDX paths");
  if (!save_checkpoint_path.empty() && seeds.size() > 1 &&
      save_checkpoint_path.find("{seed}") == std::string::npos)
    throw std::runtime_error(
        "config: save_checkpoint needs a {seed} placeholder with multiple seeds");
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end())
      throw std::runtime_error("config: unknown key '" + key + "' in " + where);
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root = json::parse(json_text);
  if (!root.is_object()) throw std::runtime_error("config: top level must be a JSON object");
  reject_unknown_keys(root,
                      {"dataset", "noise_rate", "mnist", "train_size", "test_size", "batch_size",
                       "epochs", "learning_rate", "seeds", "data_seed", "synthesizer", "anneal",
                       "pairing", "replacement_fraction", "checkpoint", "save_checkpoint",
                       "hidden_sizes", "program", "trace_pseudolabels", "output_dir"},
                      "config");

  ExperimentConfig cfg;
  if (root.contains("dataset")) {
    const std::string kind = root.at("dataset").get<std::string>();
    if (kind == "synthetic") cfg.dataset = ExperimentConfig::DatasetKind::Synthetic;
    else if (kind == "mnist") cfg.dataset = ExperimentConfig::DatasetKind::Mnist;
    else throw std::runtime_error("config: dataset must be synthetic|mnist");
  }
  if (root.contains("noise_rate")) cfg.noise_rate = root.at("noise_rate").get<double>();
  if (root.contains("mnist")) {
    const json& m = root.at("mnist");
    reject_unknown_keys(m, {"train_images", "train_labels", "test_images", "test_labels"},
                        "mnist");
    if (m.contains("train_images")) cfg.mnist.train_images = m.at("train_images").get<std::string>();
    if (m.contains("train_labels")) cfg.mnist.train_labels = m.at("train_labels").get<std::string>();
    if (m.contains("test_images")) cfg.mnist.test_images = m.at("test_images").get<std::string>();
    if (m.contains("test_labels")) cfg.mnist.test_labels = m.at("test_labels").get<std::string>();
  }
  if (root.contains("train_size")) cfg.train_size = root.at("train_size").get<size_t>();
  if (root.contains("test_size")) cfg.test_size = root.at("test_size").get<size_t>();
  if (root.contains("batch_size")) cfg.batch_size = root.at("batch_size").get<size_t>();
  if (root.contains("epochs")) cfg.epochs = root.at("epochs").get<int>();
  if (root.contains("learning_rate")) cfg.learning_rate = root.at("learning_rate").get<double>();
  if (root.contains("seeds")) cfg.seeds = root.at("seeds").get<std::vector<uint64_t>>();
  if (root.contains("data_seed")) cfg.data_seed = root.at("data_seed").get<uint64_t>();
  if (root.contains("synthesizer"))
    cfg.synthesizer = synthesizer_from_name(root.at("synthesizer").get<std::string>());
  if (root.contains("anneal")) {
    const json& a = root.at("anneal");
    reject_unknown_keys(a, {"warm_epochs", "gamma"}, "anneal");
    if (a.contains("warm_epochs")) cfg.anneal.warm_epochs = a.at("warm_epochs").get<int>();
    if (a.contains("gamma")) cfg.anneal.gamma = a.at("gamma").get<double>();
  }
  if (root.contains("pairing"))
    cfg.pairing = pairing_from_name(root.at("pairing").get<std::string>());
  if (root.contains("replacement_fraction"))
    cfg.replacement_fraction = root.at("replacement_fraction").get<double>();
  if (root.contains("checkpoint")) cfg.checkpoint = root.at("checkpoint").get<std::string>();
  if (root.contains("save_checkpoint"))
    cfg.save_checkpoint_path = root.at("save_checkpoint").get<std::string>();
  if (root.contains("hidden_sizes"))
    cfg.hidden_sizes = root.at("hidden_sizes").get<std::vector<uint32_t>>();
  if (root.contains("program")) cfg.program_path = root.at("program").get<std::string>();
  if (root.contains("trace_pseudolabels"))
    cfg.trace_pseudolabels = root.at("trace_pseudolabels").get<bool>();
  if (root.contains("output_dir")) cfg.output_dir = root.at("output_dir").get<std::string>();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

// ---------------------------------------------------------------------------
// Datasets

Dataset build_train_dataset(const ExperimentConfig& config) {
  if (config.dataset == ExperimentConfig::DatasetKind::Synthetic)
    return generate_synthetic_dataset(config.train_size, mix_seed(config.data_seed, 1),
                                      config.noise_rate, config.pairing);
  LabeledDigits digits = load_mnist_idx(config.mnist.train_images, config.mnist.train_labels);
  return make_pairs(digits, config.train_size, mix_seed(config.data_seed, 1), config.pairing,
                    config.replacement_fraction);
}

Dataset build_test_dataset(const ExperimentConfig& config) {
  if (config.dataset == ExperimentConfig::DatasetKind::Synthetic)
    return generate_synthetic_dataset(config.test_size, mix_seed(config.data_seed, 2),
                                      config.noise_rate, config.pairing);
  LabeledDigits digits = load_mnist_idx(config.mnist.test_images, config.mnist.test_labels);
  return make_pairs(digits, config.test_size, mix_seed(config.data_seed, 2), config.pairing,
                    config.replacement_fraction);
}

void check_dataset_consistency(const datalog::Program& program, const GroupSpec& spec,
                               const Dataset& ds) {
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    if (!is_one_hot_per_group(s.alpha, spec))
      throw std::runtime_error("dataset sample " + std::to_string(i) +
                               ": alpha is not one-hot per group");
    if (s.label >= program.n_outputs())
      throw std::runtime_error("dataset sample " + std::to_string(i) + ": label out of range");
    if (!program.evaluate(s.alpha)[s.label])
      throw std::runtime_error("dataset sample " + std::to_string(i) +
                               ": program does not map alpha to the label");
  }
}

// ---------------------------------------------------------------------------
// Evaluation and the implication audit

namespace {

std::atomic<uint64_t> g_audit_points{0};
std::atomic<uint64_t> g_audit_violations{0};

NetworkConfig derive_network_config(const ExperimentConfig& config, const GroupSpec& spec,
                                    const Dataset& ds) {
  if (ds.pool.empty()) throw std::runtime_error("dataset has no images");
  NetworkConfig ncfg;
  ncfg.image_height = ds.pool[0].height;
  ncfg.image_width = ds.pool[0].width;
  ncfg.pair_arity = static_cast<uint32_t>(spec.group_count());
  ncfg.classes_per_group = static_cast<uint32_t>(spec.groups[0].size());
  for (const auto& g : spec.groups)
    if (g.size() != spec.groups[0].size())
      throw std::runtime_error("network requires equal-size categorical groups");
  ncfg.hidden_sizes = config.hidden_sizes;
  return ncfg;
}

}  // namespace

uint64_t implication_points_checked() { return g_audit_points.load(); }
uint64_t implication_violations() { return g_audit_violations.load(); }

EvalResult evaluate_model(const Network& net, const AssignmentTable& table, const Dataset& ds) {
  const GroupSpec& spec = table.spec();
  const NetworkConfig& ncfg = net.config;
  const uint32_t m = ncfg.logit_count();
  const size_t feat = static_cast<size_t>(ncfg.pair_arity) * ncfg.input_size();

  EvalResult res;
  size_t out_correct = 0;
  size_t sym_correct = 0;

  constexpr size_t kChunk = 128;
  std::vector<double> features;
  for (size_t start = 0; start < ds.size(); start += kChunk) {
    const size_t bsz = std::min(kChunk, ds.size() - start);
    features.resize(bsz * feat);
    for (size_t b = 0; b < bsz; ++b)
      copy_sample_features(ds, start + b, &features[b * feat]);
    const ForwardCache fc = forward(net, features, bsz);
    for (size_t b = 0; b < bsz; ++b) {
      const Sample& s = ds.samples[start + b];
      const std::span<const double> logits(&fc.logits[b * m], m);
      const Bitstring w = hard_ground(logits, spec);
      const std::vector<uint32_t> choices = choices_of(w, spec);
      const bool output_ok = table.output_bit(table.rank_of_choices(choices), s.label);
      const bool symbol_ok = w == s.alpha;
      out_correct += output_ok ? 1 : 0;
      sym_correct += symbol_ok ? 1 : 0;
      g_audit_points.fetch_add(1, std::memory_order_relaxed);
      if (symbol_ok && !output_ok) g_audit_violations.fetch_add(1, std::memory_order_relaxed);
      for (size_t gi = 0; gi < choices.size() && gi < 2; ++gi) {
        const uint8_t truth = s.cls[gi];
        const uint32_t pred = choices[gi];
        if (truth < 10 && pred < 10) res.confusion[truth][pred] += 1;
      }
    }
  }
  if (!ds.samples.empty()) {
    res.output_acc = static_cast<double>(out_correct) / static_cast<double>(ds.size());
    res.symbol_acc = static_cast<double>(sym_correct) / static_cast<double>(ds.size());
  }
  return res;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct RunContext {
  const datalog::Program& program;
  const AssignmentTable& table;
  const Dataset& train;
  const Dataset& test;
};

RunReport run_single(const ExperimentConfig& config, const RunContext& ctx, uint64_t seed) {
  const GroupSpec& spec = ctx.table.spec();
  const NetworkConfig ncfg = derive_network_config(config, spec, ctx.train);

  Network net = config.checkpoint.empty() ? init_network(ncfg, seed)
                                          : load_checkpoint(ncfg, config.checkpoint);
  AdamState adam = make_adam(net, config.learning_rate);

  PreimageCache cache(ctx.table);
  if (config.synthesizer == SynthesizerKind::Closest ||
      config.synthesizer == SynthesizerKind::Random)
    cache.build_all();
  SynthesizerEngine engine(config.synthesizer, ctx.table, cache, ctx.train.size(), seed,
                           config.anneal);

  std::ofstream trace;
  if (config.trace_pseudolabels) {
    const std::string path =
        config.output_dir + "/pseudolabels_" + std::to_string(seed) + ".csv";
    trace.open(path, std::ios::trunc);
    if (!trace) throw std::runtime_error("cannot open pseudolabel trace: " + path);
    trace << "epoch,sample,psi\n";
    engine.set_trace([&trace](int epoch, size_t sample, const Bitstring& psi) {
      trace << epoch << ',' << sample << ',' << datalog::bits_to_string(psi) << '\n';
    });
  }

  RunReport report;
  report.seed = seed;
  report.synthesizer = config.synthesizer;

  const uint32_t m = ncfg.logit_count();
  const size_t feat = static_cast<size_t>(ncfg.pair_arity) * ncfg.input_size();

  Network best = net;  // epochs == 0 reports on the initial model
  double best_acc = -1.0;
  int best_epoch = 0;

  std::vector<double> features;
  std::vector<double> g_logits;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    size_t train_correct = 0;
    for (size_t start = 0; start < ctx.train.size(); start += config.batch_size) {
      const size_t bsz = std::min(config.batch_size, ctx.train.size() - start);
      features.resize(bsz * feat);
      for (size_t b = 0; b < bsz; ++b)
        copy_sample_features(ctx.train, start + b, &features[b * feat]);
      const ForwardCache fc = forward(net, features, bsz);

      g_logits.assign(bsz * m, 0.0);
      for (size_t b = 0; b < bsz; ++b) {
        const Sample& s = ctx.train.samples[start + b];
        const std::span<const double> logits(&fc.logits[b * m], m);
        const SynthResult sr = engine.run(logits, s.label, s.alpha, start + b, epoch);
        if (!std::isfinite(sr.loss))
          throw std::runtime_error("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   ", sample " + std::to_string(start + b));
        std::copy(sr.grad.begin(), sr.grad.end(), g_logits.begin() + b * m);

        const Bitstring w = hard_ground(logits, spec);
        if (ctx.table.output_bit(ctx.table.rank_of_choices(choices_of(w, spec)), s.label))
          ++train_correct;
      }

      const Gradients grads = backward(net, fc, g_logits);
      if (!adam_step(net, grads, adam))
        throw std::runtime_error("non-finite gradient at epoch " + std::to_string(epoch + 1));
    }
    const double acc = static_cast<double>(train_correct) / static_cast<double>(ctx.train.size());
    report.epoch_train_acc.push_back(acc);
    if (acc > best_acc) {  // strict: ties keep the earliest epoch
      best_acc = acc;
      best = net;
      best_epoch = epoch + 1;
    }
  }

  if (!config.save_checkpoint_path.empty()) {
    std::string path = config.save_checkpoint_path;
    if (const size_t pos = path.find("{seed}"); pos != std::string::npos)
      path.replace(pos, 6, std::to_string(seed));
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    save_checkpoint(best, path);
  }

  const EvalResult ev = evaluate_model(best, ctx.table, ctx.test);
  report.epoch_selected = best_epoch;
  report.output_acc = ev.output_acc;
  report.symbol_acc = ev.symbol_acc;
  report.confusion = ev.confusion;
  report.pseudolabel_stability = engine.pseudolabel_stability();
  return report;
}

}  // namespace

RunReport train_one(const ExperimentConfig& config, const datalog::Program& program,
                    uint64_t seed) {
  config.validate();
  const GroupSpec spec = GroupSpec::from_program(program);
  const AssignmentTable table(program, spec);
  const Dataset train = build_train_dataset(config);
  const Dataset test = build_test_dataset(config);
  check_dataset_consistency(program, spec, train);
  check_dataset_consistency(program, spec, test);
  return run_single(config, RunContext{program, table, train, test}, seed);
}

std::vector<RunReport> run_experiment(const ExperimentConfig& config,
                                      const datalog::Program& program, int parallel_seeds) {
  config.validate();
  const GroupSpec spec = GroupSpec::from_program(program);
  const AssignmentTable table(program, spec);
  const Dataset train = build_train_dataset(config);
  const Dataset test = build_test_dataset(config);
  check_dataset_consistency(program, spec, train);
  check_dataset_consistency(program, spec, test);
  const RunContext ctx{program, table, train, test};

  std::vector<RunReport> reports(config.seeds.size());
  const int threads = std::max(1, parallel_seeds);
  const int64_t runs = static_cast<int64_t>(config.seeds.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (threads > 1)
  for (int64_t i = 0; i < runs; ++i) {
    try {
      reports[i] = run_single(config, ctx, config.seeds[i]);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return reports;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::string format_acc(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_run_reports_csv(const std::vector<RunReport>& reports, std::ostream& out) {
  out << "seed,synthesizer,epoch_selected,output_acc,symbol_acc,pseudolabel_stability\n";
  for (const RunReport& r : reports) {
    out << r.seed << ',' << to_string(r.synthesizer) << ',' << r.epoch_selected << ','
        << format_acc(r.output_acc) << ',' << format_acc(r.symbol_acc) << ','
        << format_acc(r.pseudolabel_stability) << '\n';
  }
}

void write_confusion_csv(const std::array<std::array<int64_t, 10>, 10>& confusion,
                         std::ostream& out) {
  for (const auto& row : confusion) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      out << row[c];
    }
    out << '\n';
  }
}

void normalize_confusion_csv(std::istream& in, std::ostream& out) {
  std::string line;
  size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("heatmap: non-numeric cell '" + cell + "'");
      }
      if (used != cell.size()) throw std::runtime_error("heatmap: non-numeric cell '" + cell + "'");
      if (v < 0) throw std::runtime_error("heatmap: negative count");
      vals.push_back(v);
    }
    if (vals.empty()) throw std::runtime_error("heatmap: empty row");
    double sum = 0.0;
    for (double v : vals) sum += v;
    for (size_t c = 0; c < vals.size(); ++c) {
      if (c) out << ',';
      out << format_acc(sum > 0.0 ? vals[c] / sum : 0.0);
    }
    out << '\n';
    ++rows;
  }
  if (rows == 0) throw std::runtime_error("heatmap: empty input");
}

// ---------------------------------------------------------------------------
// The xor demonstration

XorReport xor_demo() {
  static const char* kXorSource = R"(% 2-bit xor over categorical bit groups.
input bit1/1.
input bit2/1.
output out/1.
enum input: bit1(0), bit1(1), bit2(0), bit2(1);
enum output: out(0), out(1);
out(0) <- bit1(0), bit2(0).
out(1) <- bit1(0), bit2(1).
out(1) <- bit1(1), bit2(0).
out(0) <- bit1(1), bit2(1).
)";
  const datalog::Program program = datalog::parse_program(kXorSource);
  const GroupSpec spec = GroupSpec::from_program(program);
  const AssignmentTable table(program, spec, AssignmentTable::Build::Serial);

  // Four points: every bit pair, rendered with the 0/1 glyphs.
  Dataset ds;
  ds.pool.push_back(digit_glyphs()[0]);
  ds.pool.push_back(digit_glyphs()[1]);
  for (uint32_t b1 = 0; b1 < 2; ++b1)
    for (uint32_t b2 = 0; b2 < 2; ++b2) {
      Sample s;
      s.image = {b1, b2};
      s.cls = {static_cast<uint8_t>(b1), static_cast<uint8_t>(b2)};
      s.label = b1 ^ b2;
      s.alpha.assign(4, 0);
      s.alpha[b1] = 1;
      s.alpha[2 + b2] = 1;
      ds.samples.push_back(std::move(s));
    }
  check_dataset_consistency(program, spec, ds);

  // Hand-built f_θ computing ¬α_x: one linear layer whose class-0 row is the
  // glyph-1 vs glyph-0 template difference, so glyph 1 scores as symbol 0.
  NetworkConfig ncfg;
  ncfg.image_height = 16;
  ncfg.image_width = 16;
  ncfg.pair_arity = 2;
  ncfg.hidden_sizes = {};
  ncfg.classes_per_group = 2;

  const Image& g0 = ds.pool[0];
  const Image& g1 = ds.pool[1];
  const size_t px = g0.pixels.size();
  std::vector<double> diff(px);
  double d0 = 0.0, d1 = 0.0;
  for (size_t i = 0; i < px; ++i) {
    diff[i] = static_cast<double>(g1.pixels[i]) - static_cast<double>(g0.pixels[i]);
    d0 += diff[i] * g0.pixels[i];
    d1 += diff[i] * g1.pixels[i];
  }
  const double theta = 0.5 * (d0 + d1);

  Network net;
  net.config = ncfg;
  Network::Layer layer;
  layer.in = static_cast<uint32_t>(px);
  layer.out = 2;
  layer.w.resize(2 * px);
  layer.b.resize(2);
  for (size_t i = 0; i < px; ++i) {
    layer.w[i] = diff[i];         // class 0 fires on glyph 1
    layer.w[px + i] = -diff[i];   // class 1 fires on glyph 0
  }
  layer.b[0] = -theta;
  layer.b[1] = theta;
  net.layers.push_back(std::move(layer));

  const EvalResult ev = evaluate_model(net, table, ds);

  XorReport report;
  report.total = ds.size();
  report.output_correct = static_cast<size_t>(std::lround(ev.output_acc * static_cast<double>(ds.size())));
  report.symbol_correct = static_cast<size_t>(std::lround(ev.symbol_acc * static_cast<double>(ds.size())));

  // Per-point narration.
  const size_t feat = 2 * px;
  std::vector<double> features(ds.size() * feat);
  for (size_t i = 0; i < ds.size(); ++i) copy_sample_features(ds, i, &features[i * feat]);
  const ForwardCache fc = forward(net, features, ds.size());
  for (size_t i = 0; i < ds.size(); ++i) {
    const Sample& s = ds.samples[i];
    const std::span<const double> logits(&fc.logits[i * 4], 4);
    const Bitstring w = hard_ground(logits, spec);
    const std::vector<uint32_t> choices = choices_of(w, spec);
    const bool output_ok = table.output_bit(table.rank_of_choices(choices), s.label);
    const bool symbol_ok = w == s.alpha;
    std::ostringstream line;
    line << "input (" << int(s.cls[0]) << "," << int(s.cls[1]) << "): predicted symbols ("
         << choices[0] << "," << choices[1] << "), output " << (choices[0] ^ choices[1])
         << ", expected " << s.label << " -> output " << (output_ok ? "correct" : "wrong")
         << ", symbol " << (symbol_ok ? "correct" : "wrong");
    report.lines.push_back(line.str());
  }
  return report;
}

}  // namespace symcor
