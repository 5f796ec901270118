#include "tnjet/cli.hpp"

#include "tnjet/hwmodel.hpp"
#include "tnjet/parallel.hpp"
#include "tnjet/qmi.hpp"
#include "tnjet/quant.hpp"
#include "tnjet/synthetic.hpp"
#include "tnjet/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

namespace tnjet {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

// Inputs hashed into the manifest, keyed by the path as given.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void input(const std::string& path) { inputs_[path] = sha256_file(path); }
  ordered_json& config() { return config_; }
  void seed(std::uint64_t s) { seed_ = s; }

  void write(const std::filesystem::path& path) const {
    ordered_json j;
    j["subcommand"] = subcommand_;
    j["version"] = kVersion;
    j["seed"] = seed_;
    j["config"] = config_;
    j["inputs"] = inputs_;
    write_text(path, dump(j));
  }

 private:
  std::string subcommand_;
  ordered_json config_ = ordered_json::object();
  ordered_json inputs_ = ordered_json::object();
  std::uint64_t seed_ = 0;
};

std::filesystem::path manifest_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  if (!out.empty()) return out + ".manifest.json";
  return {};
}

ordered_json auc_json(const std::vector<double>& auc) {
  ordered_json j = ordered_json::object();
  for (std::size_t c = 0; c < auc.size() && c < kClassNames.size(); ++c) j[std::string(kClassNames[c])] = auc[c];
  return j;
}

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["auc"] = auc_json(m.auc);
  j["loss_curve"] = m.loss_curve;
  return j;
}

// ---- model and data options ----------------------------------------------

struct ModelOptions {
  std::string arch = "mps";
  int n = 8;
  int bond = 10;
  int classes = kNumClasses;
  std::string layout = "per-particle";
  std::string order = "natural";

  void add_to(CLI::App& app, bool with_embedding) {
    app.add_option("--arch", arch, "Architecture: mps or ttn")->check(CLI::IsMember({"mps", "ttn"}));
    app.add_option("--n", n, "Number of input sites");
    app.add_option("--bond,--chi", bond, "Bond dimension cap (D for MPS, chi for TTN)");
    if (with_embedding) {
      app.add_option("--layout", layout, "Embedding: per-particle or per-feature")
          ->check(CLI::IsMember({"per-particle", "per-feature"}));
      app.add_option("--order", order, "Site order: natural or pt-first")->check(CLI::IsMember({"natural", "pt-first"}));
    }
  }

  EmbeddingSpec embedding() const { return {parse_layout(layout), parse_site_order(order)}; }

  void validate() const {
    if (n < 1) throw UsageError("--n must be positive");
    if (bond < 1) throw UsageError("--bond must be positive");
    if (arch == "ttn" && (n < 4 || (n & (n - 1)) != 0)) {
      throw UsageError("--arch ttn requires --n to be a power of two >= 4, got " + std::to_string(n));
    }
    if (parse_layout(layout) == EmbeddingLayout::PerFeature && n % 2 != 0) {
      throw UsageError("--layout per-feature needs an even number of sites");
    }
    if (parse_site_order(order) == SiteOrder::PtFirst && parse_layout(layout) != EmbeddingLayout::PerFeature) {
      throw UsageError("--order pt-first applies only to --layout per-feature");
    }
  }

  ordered_json to_json() const {
    return {{"arch", arch}, {"n", n}, {"bond", bond}, {"classes", classes}, {"layout", layout}, {"order", order}};
  }
};

AnyModel build_model(const ModelOptions& o, int phys_dim, std::uint64_t seed) {
  if (o.arch == "mps") return build_mps(o.n, phys_dim, o.bond, o.classes, seed);
  return build_ttn(o.n, phys_dim, o.bond, o.classes, seed);
}

int particles_for(int sites, const EmbeddingSpec& spec) { return sites / spec.sites_per_particle(); }

std::vector<JetRecord> load_limited(const std::string& path, std::size_t limit) {
  auto records = load_dataset(path);
  if (limit > 0 && records.size() > limit) records.resize(limit);
  return records;
}

LabeledSet prepare(std::span<const JetRecord> records, const ScalerParams& scaler, const EmbeddingSpec& spec,
                   int sites) {
  return embed_batch(make_batch(records, scaler, particles_for(sites, spec)), spec);
}

std::vector<int> parse_fb_list(const std::string& text) {
  std::vector<int> out;
  auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw UsageError("invalid --fb value '" + text + "'");
    }
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int lo = to_int(text.substr(0, dots));
    const int hi = to_int(text.substr(dots + 2));
    if (lo > hi) throw UsageError("empty --fb range '" + text + "'");
    for (int fb = lo; fb <= hi; ++fb) out.push_back(fb);
  } else {
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(to_int(item));
  }
  for (int fb : out) {
    if (fb < 1 || fb > FxpFormat::kMaxFracBits) throw UsageError("--fb value " + std::to_string(fb) + " out of range");
  }
  return out;
}

// ---- subcommands -----------------------------------------------------------

struct Common {
  std::uint64_t seed = 0;
  std::string manifest;
  int threads = 0;

  void add_to(CLI::App& app) {
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--manifest", manifest, "Manifest path (default: <out>.manifest.json)");
    app.add_option("--threads", threads, "Worker threads (default: TNT_THREADS or all cores)");
  }
};

struct TrainOptions {
  Common common;
  ModelOptions model;
  std::string data, test, out, report;
  std::string loss;
  int epochs = 50;
  int batch = 512;
  double lr = 1e-3;
  int folds = 1;
  std::size_t limit = 0;
  double test_fraction = 0.2;
};

int cmd_train(const TrainOptions& o, std::ostream& out) {
  o.model.validate();
  const EmbeddingSpec spec = o.model.embedding();
  const Architecture arch = parse_architecture(o.model.arch);

  TrainConfig cfg;
  cfg.batch_size = o.batch;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.seed = o.common.seed;
  cfg.folds = o.folds;
  cfg.threads = o.common.threads;
  cfg.loss = o.loss.empty() ? default_loss(arch) : (o.loss == "ce" ? LossKind::CrossEntropy : LossKind::MeanSquared);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(o.test_fraction > 0.0 && o.test_fraction < 1.0)) throw UsageError("--test-fraction must lie in (0, 1)");

  Manifest manifest("train");
  manifest.seed(o.common.seed);
  manifest.input(o.data);
  auto records = load_limited(o.data, o.limit);
  std::vector<JetRecord> test_records;
  if (!o.test.empty()) {
    manifest.input(o.test);
    test_records = load_limited(o.test, 0);
  } else if (o.folds == 1) {
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(o.common.seed ^ 0x5eedf00dULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(o.test_fraction * static_cast<double>(records.size()));
    std::vector<JetRecord> train_part;
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_test ? test_records : train_part).push_back(records[idx[i]]);
    records = std::move(train_part);
  }

  const ScalerParams scaler = fit_scaler(records);
  const LabeledSet train_set = prepare(records, scaler, spec, o.model.n);
  const int d = spec.phys_dim();

  ordered_json report;
  report["arch"] = o.model.arch;
  report["n_sites"] = o.model.n;
  report["loss"] = to_string(cfg.loss);
  report["train_size"] = train_set.size();

  Checkpoint ckpt;
  ckpt.embedding = spec;
  ckpt.output = output_rule_for(cfg.loss);
  ckpt.scaler = scaler;

  if (o.folds > 1) {
    const auto cv = cross_validate(
        [&](int fold) { return build_model(o.model, d, o.common.seed + static_cast<std::uint64_t>(fold)); }, train_set,
        cfg);
    ordered_json folds = ordered_json::array();
    for (const auto& m : cv.folds) folds.push_back(metrics_json(m));
    report["folds"] = folds;
    report["mean_accuracy"] = cv.mean_accuracy;
    report["std_accuracy"] = cv.std_accuracy;
    report["mean_auc"] = auc_json(cv.mean_auc);
  }
  // With cross-validation and no explicit test set, the final model has no held-out data.
  const LabeledSet test_set = test_records.empty() ? LabeledSet{} : prepare(test_records, scaler, spec, o.model.n);
  auto result = train_model(build_model(o.model, d, o.common.seed), train_set, test_set, cfg);
  report["params"] = param_count(result.model);
  report["test_size"] = test_set.size();
  report["metrics"] = metrics_json(result.metrics);
  ckpt.model = std::move(result.model);

  if (!o.out.empty()) save_checkpoint(o.out, ckpt);
  const std::string report_path = !o.report.empty() ? o.report : (o.out.empty() ? "" : o.out + ".metrics.json");
  if (!report_path.empty()) write_text(report_path, dump(report));
  out << dump(report);

  auto& c = manifest.config();
  c["model"] = o.model.to_json();
  c["epochs"] = cfg.epochs;
  c["batch"] = cfg.batch_size;
  c["lr"] = cfg.learning_rate;
  c["adam"] = {{"beta1", cfg.adam_beta1}, {"beta2", cfg.adam_beta2}, {"eps", cfg.adam_eps}};
  c["loss"] = to_string(cfg.loss);
  c["folds"] = cfg.folds;
  c["limit"] = o.limit;
  c["test_fraction"] = o.test.empty() ? o.test_fraction : 0.0;
  c["out"] = o.out;
  c["report"] = report_path;
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct EvalOptions {
  Common common;
  std::string ckpt, data, out;
  std::size_t limit = 0;
};

int cmd_eval(const EvalOptions& o, std::ostream& out) {
  Manifest manifest("eval");
  manifest.seed(o.common.seed);
  manifest.input(o.ckpt);
  manifest.input(o.data);
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const auto records = load_limited(o.data, o.limit);
  const LabeledSet set = prepare(records, ckpt.scaler, ckpt.embedding, n_sites(ckpt.model));
  const Evaluation ev = evaluate(ckpt.model, set, ckpt.output, false);

  ordered_json report;
  report["arch"] = to_string(architecture_of(ckpt.model));
  report["n_sites"] = n_sites(ckpt.model);
  report["size"] = set.size();
  report["accuracy"] = ev.accuracy;
  report["auc"] = auc_json(ev.auc);
  if (!o.out.empty()) write_text(o.out, dump(report));
  out << dump(report);

  manifest.config() = {{"ckpt", o.ckpt}, {"data", o.data}, {"limit", o.limit}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct SweepOptions {
  Common common;
  std::string ckpt, data, out, fb = "2..14", mode = "both";
  std::size_t limit = 0;
  std::size_t calibrate = 1000;
};

int cmd_sweep(const SweepOptions& o, std::ostream& out) {
  const auto fbs = parse_fb_list(o.fb);
  std::vector<QuantMode> modes;
  if (o.mode == "both" || o.mode == "fpop") modes.push_back(QuantMode::Fpop);
  if (o.mode == "both" || o.mode == "qop") modes.push_back(QuantMode::Qop);

  Manifest manifest("ptq-sweep");
  manifest.seed(o.common.seed);
  manifest.input(o.ckpt);
  manifest.input(o.data);
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const auto records = load_limited(o.data, o.limit);
  const LabeledSet set = prepare(records, ckpt.scaler, ckpt.embedding, n_sites(ckpt.model));
  RangeCalibration cal;
  cal.shifts.assign(tensors(ckpt.model).size(), 0);
  if (o.calibrate > 0) {
    std::vector<std::size_t> head(std::min(o.calibrate, set.size()));
    std::iota(head.begin(), head.end(), std::size_t{0});
    cal = calibrate_ranges(ckpt.model, set.subset(head));
  }
  const SweepResult sweep = ptq_sweep(apply_calibration(ckpt.model, cal), set, fbs, modes, ckpt.output);

  const std::string csv = sweep_csv(sweep);
  if (!o.out.empty()) write_text(o.out, csv);
  ordered_json summary;
  summary["reference_accuracy"] = sweep.reference_accuracy;
  summary["calibration_shifts"] = cal.shifts;
  for (QuantMode m : modes) summary["knee"][to_string(m)] = find_knee(sweep, m);
  if (!o.out.empty()) write_text(o.out + ".summary.json", dump(summary));
  out << csv;

  manifest.config() = {{"ckpt", o.ckpt}, {"data", o.data}, {"fb", fbs}, {"mode", o.mode}, {"limit", o.limit},
                       {"calibrate", o.calibrate}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct QmiOptions {
  Common common;
  std::string ckpt, out;
};

int cmd_qmi(const QmiOptions& o, std::ostream& out) {
  Manifest manifest("qmi");
  manifest.seed(o.common.seed);
  manifest.input(o.ckpt);
  const Checkpoint ckpt = load_checkpoint(o.ckpt);
  const int sites = n_sites(ckpt.model);
  const QmiMatrix q = qmi_matrix(ckpt.model, site_labels(ckpt.embedding, particles_for(sites, ckpt.embedding)));
  const std::string csv = qmi_csv(q);
  if (!o.out.empty()) write_text(o.out, csv);
  out << csv;
  manifest.config() = {{"ckpt", o.ckpt}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct EstimateOptions {
  Common common;
  ModelOptions model;
  std::string ckpt, out;
  int d = 7;
  int fb = 14;
  int nreg = -1;
  int adder_weight = -1;
  int stage_overhead = -1;
  int offset = 0;
  bool offset_set = false;
  double clock_mhz = 250.0;
};

ordered_json report_json(const HardwareReport& r) {
  ordered_json j;
  j["arch"] = to_string(r.topology.arch);
  j["n_sites"] = r.topology.n_sites;
  j["phys_dim"] = r.topology.phys_dim;
  j["bond"] = r.topology.bond;
  j["frac_bits"] = r.frac_bits;
  j["word_bits"] = 2 + r.frac_bits;
  j["params"] = r.params;
  j["memory_kbit"] = r.memory_kbit;
  j["memory_kbit_floor"] = r.memory_kbit_floor;
  j["total_mults"] = r.total_mults;
  j["total_adds"] = r.total_adds;
  j["stages"] = r.n_stages;
  j["critical_path_cycles"] = r.latency.cycles;
  j["latency_ns"] = r.latency.ns;
  j["n_reg"] = r.cost.n_reg;
  j["cost_model"] = {{"clock_mhz", r.cost.clock_mhz},
                     {"adder_weight", r.cost.adder_weight},
                     {"stage_overhead", r.cost.stage_overhead},
                     {"offset", r.cost.offset}};
  return j;
}

int cmd_estimate(const EstimateOptions& o, std::ostream& out) {
  Manifest manifest("estimate");
  manifest.seed(o.common.seed);
  Topology topo;
  if (!o.ckpt.empty()) {
    manifest.input(o.ckpt);
    topo = Topology::of(load_checkpoint(o.ckpt).model);
  } else {
    o.model.validate();
    topo = o.model.arch == "mps" ? Topology::mps(o.model.n, o.d, o.model.bond, o.model.classes)
                                 : Topology::ttn(o.model.n, o.d, o.model.bond, o.model.classes);
  }
  if (o.fb < 0 || o.fb > FxpFormat::kMaxFracBits) throw UsageError("--fb out of range");
  CostModel cost = CostModel::defaults(topo.arch);
  cost.clock_mhz = o.clock_mhz;
  if (o.nreg >= 0) cost.n_reg = o.nreg;
  if (o.adder_weight >= 0) cost.adder_weight = o.adder_weight;
  if (o.stage_overhead >= 0) cost.stage_overhead = o.stage_overhead;
  if (o.offset_set) cost.offset = o.offset;
  const ordered_json report = report_json(hardware_report(topo, o.fb, cost));
  if (!o.out.empty()) write_text(o.out, dump(report));
  out << dump(report);

  manifest.config() = {{"ckpt", o.ckpt}, {"model", o.model.to_json()}, {"d", o.d}, {"fb", o.fb},
                       {"cost", report["cost_model"]}, {"n_reg", cost.n_reg}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct ParamsOptions {
  Common common;
  ModelOptions model;
  int d = 7;
};

int cmd_params(const ParamsOptions& o, std::ostream& out) {
  o.model.validate();
  if (o.d < 1) throw UsageError("--d must be positive");
  const Topology topo = o.model.arch == "mps" ? Topology::mps(o.model.n, o.d, o.model.bond, o.model.classes)
                                              : Topology::ttn(o.model.n, o.d, o.model.bond, o.model.classes);
  out << topo.param_count() << '\n';
  if (!o.common.manifest.empty()) {
    Manifest manifest("params");
    manifest.seed(o.common.seed);
    manifest.config() = {{"model", o.model.to_json()}, {"d", o.d}};
    manifest.write(o.common.manifest);
  }
  return 0;
}

struct ConvertCheckOptions {
  Common common;
  std::string data, out;
};

int cmd_convert_check(const ConvertCheckOptions& o, std::ostream& out) {
  Manifest manifest("convert-check");
  manifest.seed(o.common.seed);
  manifest.input(o.data);
  const auto records = load_dataset(o.data);
  std::array<std::size_t, kNumClasses> counts{};
  Index max_constituents = 0;
  for (const auto& r : records) {
    counts[static_cast<std::size_t>(r.label)] += 1;
    max_constituents = std::max(max_constituents, r.constituents.rows());
  }
  ordered_json report;
  report["valid"] = true;
  report["jets"] = records.size();
  report["max_constituents"] = max_constituents;
  for (std::size_t c = 0; c < counts.size(); ++c) report["labels"][std::string(kClassNames[c])] = counts[c];
  if (!o.out.empty()) write_text(o.out, dump(report));
  out << dump(report);
  manifest.config() = {{"data", o.data}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

struct SynthOptions {
  Common common;
  std::string out;
  std::size_t n_jets = 1000;
  int max_constituents = 30;
};

int cmd_synth(const SynthOptions& o, std::ostream& out) {
  const auto records = make_synthetic_jets({o.n_jets, o.common.seed, o.max_constituents});
  write_dataset(o.out, records);
  out << "wrote " << records.size() << " jets to " << o.out << '\n';
  Manifest manifest("synth");
  manifest.seed(o.common.seed);
  manifest.config() = {{"n_jets", o.n_jets}, {"max_constituents", o.max_constituents}, {"out", o.out}};
  if (const auto mp = manifest_path(o.common.manifest, o.out); !mp.empty()) manifest.write(mp);
  return 0;
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message) {
  ordered_json j;
  j["error"] = {{"kind", kind}, {"message", message}};
  err << j.dump() << '\n';
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 unavailable");
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensor-network jet tagging: training, quantization and hardware estimates", "tnjet"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Train an MPS or TTN classifier");
  train.common.add_to(*train_cmd);
  train.model.add_to(*train_cmd, true);
  train_cmd->add_option("--data", train.data, "Training JTN1 file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--test", train.test, "Test JTN1 file (default: hold out --test-fraction)")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Checkpoint output path");
  train_cmd->add_option("--report", train.report, "Metrics JSON path (default: <out>.metrics.json)");
  train_cmd->add_option("--loss", train.loss, "ce or mse (default: ce for mps, mse for ttn)")
      ->check(CLI::IsMember({"ce", "mse"}));
  train_cmd->add_option("--epochs", train.epochs, "Epochs");
  train_cmd->add_option("--batch", train.batch, "Mini-batch size");
  train_cmd->add_option("--lr", train.lr, "Adam learning rate");
  train_cmd->add_option("--folds", train.folds, "Cross-validation folds (1 = plain train/test)");
  train_cmd->add_option("--limit", train.limit, "Use only the first N training jets");
  train_cmd->add_option("--test-fraction", train.test_fraction, "Held-out fraction when --test is absent");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval.common.add_to(*eval_cmd);
  eval_cmd->add_option("--ckpt", eval.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", eval.data, "JTN1 file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "Metrics JSON path");
  eval_cmd->add_option("--limit", eval.limit, "Use only the first N jets");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("ptq-sweep", "Post-training quantization accuracy sweep");
  sweep.common.add_to(*sweep_cmd);
  sweep_cmd->add_option("--ckpt", sweep.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", sweep.data, "JTN1 file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--fb", sweep.fb, "Fractional bits: range lo..hi or list a,b,c");
  sweep_cmd->add_option("--mode", sweep.mode, "fpop, qop or both")->check(CLI::IsMember({"fpop", "qop", "both"}));
  sweep_cmd->add_option("--out", sweep.out, "CSV output path");
  sweep_cmd->add_option("--limit", sweep.limit, "Use only the first N jets");
  sweep_cmd->add_option("--calibrate", sweep.calibrate,
                        "Jets used for power-of-two range calibration before quantizing (0 = off)");

  QmiOptions qmi;
  auto* qmi_cmd = app.add_subcommand("qmi", "Quantum mutual information matrix of a checkpoint");
  qmi.common.add_to(*qmi_cmd);
  qmi_cmd->add_option("--ckpt", qmi.ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  qmi_cmd->add_option("--out", qmi.out, "CSV output path");

  EstimateOptions est;
  auto* est_cmd = app.add_subcommand("estimate", "Latency and memory estimate");
  est.common.add_to(*est_cmd);
  est.model.add_to(*est_cmd, false);
  est_cmd->add_option("--ckpt", est.ckpt, "Checkpoint (overrides topology flags)")->check(CLI::ExistingFile);
  est_cmd->add_option("--d", est.d, "Physical dimension when no checkpoint is given");
  est_cmd->add_option("--fb", est.fb, "Fractional bits");
  est_cmd->add_option("--nreg", est.nreg, "Cycles per multiplication");
  est_cmd->add_option("--adder-weight", est.adder_weight, "Cycles per adder-tree level");
  est_cmd->add_option("--stage-overhead", est.stage_overhead, "Fixed cycles per stage");
  auto* offset_opt = est_cmd->add_option("--offset", est.offset, "Fixed cycle offset");
  est_cmd->add_option("--clock-mhz", est.clock_mhz, "Clock frequency");
  est_cmd->add_option("--out", est.out, "JSON output path");

  ParamsOptions params;
  auto* params_cmd = app.add_subcommand("params", "Print the parameter count of a topology");
  params.common.add_to(*params_cmd);
  params.model.add_to(*params_cmd, false);
  params_cmd->add_option("--d", params.d, "Physical dimension");

  ConvertCheckOptions check;
  auto* check_cmd = app.add_subcommand("convert-check", "Validate a JTN1 file");
  check.common.add_to(*check_cmd);
  check_cmd->add_option("--data", check.data, "JTN1 file")->required()->check(CLI::ExistingFile);
  check_cmd->add_option("--out", check.out, "JSON summary path");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic JTN1 jet sample");
  synth.common.add_to(*synth_cmd);
  synth_cmd->add_option("--out", synth.out, "JTN1 output path")->required();
  synth_cmd->add_option("--n-jets", synth.n_jets, "Number of jets");
  synth_cmd->add_option("--max-constituents", synth.max_constituents, "Constituent cap per jet");

  if (args.empty()) {
    out << app.help();
    return 2;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", e.what());
    return 2;
  }

  est.offset_set = offset_opt->count() > 0;
  auto* active = app.get_subcommands().front();
  try {
    const int threads = std::max({train.common.threads, eval.common.threads, sweep.common.threads, qmi.common.threads,
                                  est.common.threads, params.common.threads, check.common.threads,
                                  synth.common.threads});
    if (std::min({train.common.threads, eval.common.threads, sweep.common.threads, qmi.common.threads}) < 0) {
      throw UsageError("--threads must be non-negative");
    }
    const ScopedWorkerLimit limit(threads);
    if (active == train_cmd) return cmd_train(train, out);
    if (active == eval_cmd) return cmd_eval(eval, out);
    if (active == sweep_cmd) return cmd_sweep(sweep, out);
    if (active == qmi_cmd) return cmd_qmi(qmi, out);
    if (active == est_cmd) return cmd_estimate(est, out);
    if (active == params_cmd) return cmd_params(params, out);
    if (active == check_cmd) return cmd_convert_check(check, out);
    if (active == synth_cmd) return cmd_synth(synth, out);
  } catch (const UsageError& e) {
    error_record(err, "usage", e.what());
    return 2;
  } catch (const DatasetError& e) {
    error_record(err, "dataset", e.what());
    return 1;
  } catch (const CheckpointError& e) {
    error_record(err, "checkpoint", e.what());
    return 1;
  } catch (const TrainingDiverged& e) {
    error_record(err, "diverged", e.what());
    return 1;
  } catch (const std::exception& e) {
    error_record(err, "runtime", e.what());
    return 1;
  }
  return 2;
}

}  // namespace tnjet
