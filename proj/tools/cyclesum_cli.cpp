// cyclesum: synth / splits / train / eval / verify-math / gradcheck.
//
// Exit codes: 0 ok, 2 config error, 3 numerical abort, 4 verification failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cyclesum/data_io.hpp"
#include "cyclesum/info_math.hpp"
#include "cyclesum/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cyclesum;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericalAbort = 3;
constexpr int kVerifyFailed = 4;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* help;
};

// Every key a config file may set. Flags map onto the same keys.
const KeySpec kKeys[] = {
    {"seed", "7", "master seed (env CYCLESUM_SEED overrides the default)"},
    {"data.dir", "data", "dataset directory"},
    {"data.splits", "", "splits file (default <data.dir>/splits.json, else generated)"},
    {"synth.videos", "20", ""},
    {"synth.frames", "96", ""},
    {"synth.dim", "32", ""},
    {"synth.events", "6", ""},
    {"synth.salience", "0.3", ""},
    {"synth.noise", "0.1", ""},
    {"synth.spread", "0.5", ""},
    {"model.hidden", "64", ""},
    {"model.z_dim", "16", ""},
    {"model.selector_layers", "3", ""},
    {"model.vae_layers", "2", ""},
    {"model.critic_layers", "1", ""},
    {"train.variant", "cycle-sum", "cycle-sum|c|1g|2g|gf|gb"},
    {"train.n_generator_iters", "3", ""},
    {"train.clip_c", "0.1", ""},
    {"train.clip_generators", "true", ""},
    {"train.lr", "1e-4", ""},
    {"train.rms_decay", "0.9", ""},
    {"train.max_epochs", "200", ""},
    {"train.pretrain_epochs", "0", ""},
    {"train.pretrain_lr", "1e-3", ""},
    {"train.convergence_window", "10", ""},
    {"train.convergence_tolerance", "0.01", ""},
    {"train.precision", "f64", "f64|f32"},
    {"train.split", "0", ""},
    {"train.all_splits", "false", "train one model per split"},
    {"loss.lambda_adv", "1.0", ""},
    {"loss.lambda_gen", "0.5", ""},
    {"loss.lambda_cycle", "10.0", ""},
    {"loss.sigma", "0.3", ""},
    {"eval.fraction", "0.15", ""},
    {"eval.aggregation", "mean", "mean|max"},
    {"eval.draws", "100", ""},
    {"eval.checkpoint", "final", "final|best"},
    {"run.root", "runs", "parent of run directories"},
    {"math.joints", "100", ""},
    {"math.max_alphabet", "16", ""},
    {"math.pairs", "100", ""},
    {"gradcheck.term", "all", ""},
    {"gradcheck.precision", "f64", ""},
    {"gradcheck.h", "1e-5", ""},
    {"gradcheck.tol", "1e-4", ""},
};

class RunConfig {
 public:
  RunConfig() {
    for (const auto& k : kKeys) values_[k.key] = k.fallback;
    if (const char* env = std::getenv("CYCLESUM_SEED")) values_["seed"] = env;
  }

  static bool known(const std::string& key) {
    return std::any_of(std::begin(kKeys), std::end(kKeys), [&](const KeySpec& k) { return key == k.key; });
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  // Flat `key = value` lines; '#' starts a comment.
  void merge_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      const auto key = trim(line.substr(0, eq));
      if (key.empty() && eq == std::string::npos) continue;
      if (eq == std::string::npos) throw ConfigError(file.string() + ":" + std::to_string(n) + ": expected key = value");
      try {
        set(key, trim(line.substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": '" + s + "' is not a finite number");
  }

  std::size_t count(const std::string& key) const {
    const auto& s = str(key);
    if (!s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      return std::stoull(s);
    }
    throw ConfigError(key + ": '" + s + "' is not a non-negative integer");
  }

  bool flag(const std::string& key) const {
    const auto& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": '" + s + "' is not a boolean");
  }

  std::string echo() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  std::map<std::string, std::string> values_;
};

// Flag -> key bindings, applied after the config file so flags win.
struct Bindings {
  std::vector<std::pair<CLI::Option*, std::string>> opts;
  std::map<std::string, std::string> raw;
  std::string config_file;

  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help = "") {
    opts.emplace_back(app->add_option(flag, raw[key], help), key);
  }

  void apply(RunConfig& cfg) const {
    if (!config_file.empty()) cfg.merge_file(config_file);
    for (const auto& [opt, key] : opts)
      if (opt->count() > 0) cfg.set(key, raw.at(key));
  }
};

ModelDims model_dims(const RunConfig& c, std::size_t feature_dim) {
  ModelDims d;
  d.feature_dim = feature_dim;
  d.hidden = c.count("model.hidden");
  d.z_dim = c.count("model.z_dim");
  d.selector_layers = c.count("model.selector_layers");
  d.vae_layers = c.count("model.vae_layers");
  d.critic_layers = c.count("model.critic_layers");
  if (!d.hidden || !d.z_dim || !d.selector_layers || !d.vae_layers || !d.critic_layers) {
    throw ConfigError("model dimensions must be >= 1");
  }
  return d;
}

ad::Precision precision_of(const std::string& s) {
  if (s == "f64") return ad::Precision::f64;
  if (s == "f32") return ad::Precision::f32;
  throw ConfigError("precision must be f64 or f32, got '" + s + "'");
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.seed = c.count("seed");
  t.n_generator_iters = c.count("train.n_generator_iters");
  t.clip_c = c.real("train.clip_c");
  t.clip_generators = c.flag("train.clip_generators");
  t.lr = c.real("train.lr");
  t.rms_decay = c.real("train.rms_decay");
  t.max_epochs = c.count("train.max_epochs");
  t.pretrain_epochs = c.count("train.pretrain_epochs");
  t.pretrain_lr = c.real("train.pretrain_lr");
  t.convergence_window = c.count("train.convergence_window");
  t.convergence_tolerance = c.real("train.convergence_tolerance");
  t.precision = precision_of(c.str("train.precision"));
  t.weights.lambda_adv = c.real("loss.lambda_adv");
  t.weights.lambda_gen = c.real("loss.lambda_gen");
  t.weights.lambda_cycle = c.real("loss.lambda_cycle");
  t.weights.sigma = c.real("loss.sigma");
  try {
    apply_variant(t.weights, c.str("train.variant"));
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return out.str();
}

// <root>/<timestamp>-seed<seed>, suffixed until unused.
fs::path fresh_run_dir(const RunConfig& c) {
  const fs::path root = c.str("run.root");
  const std::string base = timestamp() + "-seed" + c.str("seed");
  fs::path dir = root / base;
  for (int i = 1; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

// First unused `<stem><n><ext>` in dir, so reports never overwrite.
fs::path fresh_file(const fs::path& dir, const std::string& stem, const std::string& ext) {
  fs::path p = dir / (stem + ext);
  for (int i = 1; fs::exists(p); ++i) p = dir / (stem + "-" + std::to_string(i) + ext);
  return p;
}

std::vector<std::string> ids_of(const std::vector<data::VideoRecord>& recs) {
  std::vector<std::string> ids;
  for (const auto& r : recs) ids.push_back(r.id);
  return ids;
}

std::vector<eval::Split> resolve_splits(const RunConfig& c, const std::vector<data::VideoRecord>& recs) {
  const auto ids = ids_of(recs);
  fs::path file = c.str("data.splits");
  if (file.empty()) file = fs::path(c.str("data.dir")) / "splits.json";
  if (fs::exists(file)) return data::load_splits(file, ids);
  if (!c.str("data.splits").empty()) throw ConfigError("splits file " + file.string() + " not found");
  return eval::make_splits(ids, c.count("seed"));
}

std::size_t feature_dim_of(const std::vector<data::VideoRecord>& recs) {
  if (recs.empty()) throw ConfigError("dataset is empty");
  for (const auto& r : recs) {
    if (r.d != recs.front().d) {
      throw ConfigError("mixed feature dims: '" + recs.front().id + "' has " + std::to_string(recs.front().d) +
                        ", '" + r.id + "' has " + std::to_string(r.d));
    }
  }
  return recs.front().d;
}

const data::VideoRecord& find_record(const std::vector<data::VideoRecord>& recs, const std::string& id) {
  for (const auto& r : recs)
    if (r.id == id) return r;
  throw ConfigError("video '" + id + "' is not in the dataset");
}

// ---------------------------------------------------------------- synth

int cmd_synth(const RunConfig& c) {
  data::SynthSpec spec;
  spec.n_videos = c.count("synth.videos");
  spec.k = c.count("synth.frames");
  spec.d = c.count("synth.dim");
  spec.n_events = c.count("synth.events");
  spec.salience = c.real("synth.salience");
  spec.noise = c.real("synth.noise");
  spec.spread = c.real("synth.spread");
  spec.seed = c.count("seed");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const fs::path dir = c.str("data.dir");
  const auto recs = data::generate_synthetic(spec);
  data::save_dataset(dir, recs);
  std::cout << "wrote " << recs.size() << " videos (k=" << spec.k << ", d=" << spec.d << ", "
            << data::salient_event_count(spec) << " of " << spec.n_events << " events salient) to " << dir.string()
            << '\n';
  if (recs.size() >= 5) {
    data::save_splits(dir / "splits.json", eval::make_splits(ids_of(recs), spec.seed));
    std::cout << "wrote 5 splits to " << (dir / "splits.json").string() << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- splits

int cmd_splits(const RunConfig& c, const std::string& out) {
  const auto recs = data::load_dataset(c.str("data.dir"));
  const auto splits = eval::make_splits(ids_of(recs), c.count("seed"));
  const fs::path file = out.empty() ? fs::path(c.str("data.dir")) / "splits.json" : fs::path(out);
  data::save_splits(file, splits);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    std::cout << "split " << i << ": " << splits[i].train.size() << " train / " << splits[i].test.size() << " test\n";
  }
  std::cout << "wrote " << file.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- train

int cmd_train(const RunConfig& c) {
  const TrainConfig tc = train_config(c);
  std::vector<std::string> warnings;
  const auto recs = data::load_dataset(c.str("data.dir"), &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  const auto splits = resolve_splits(c, recs);
  const ModelDims dims = model_dims(c, feature_dim_of(recs));

  std::vector<std::size_t> which;
  if (c.flag("train.all_splits")) {
    for (std::size_t i = 0; i < splits.size(); ++i) which.push_back(i);
  } else {
    const std::size_t s = c.count("train.split");
    if (s >= splits.size()) {
      throw ConfigError("train.split " + std::to_string(s) + " out of range (" + std::to_string(splits.size()) + " splits)");
    }
    which.push_back(s);
  }

  const fs::path run = fresh_run_dir(c);
  std::ofstream(run / "config.txt") << c.echo();
  std::cout << "run directory " << run.string() << "\n" << c.echo();
  std::cout << "variant " << variant_label(c.str("train.variant")) << ": gan_f=" << tc.weights.enable_gan_f
            << " gan_b=" << tc.weights.enable_gan_b << " cycle_f=" << tc.weights.enable_cycle_f
            << " cycle_b=" << tc.weights.enable_cycle_b << " backward_gen=" << tc.weights.enable_backward_gen << '\n';

  for (std::size_t s : which) {
    const fs::path dir = run / ("split" + std::to_string(s));
    fs::create_directories(dir);
    std::vector<ad::Tensor> videos;
    for (const auto& id : splits[s].train) videos.push_back(find_record(recs, id).features_tensor());

    auto nets = CycleSumNets::create(dims, tc.seed);
    auto best = nets.clone();
    TrainHooks hooks;
    std::ofstream epochs(dir / "epochs.csv");
    epochs << LossBreakdown::csv_header() << '\n';
    hooks.on_epoch = [&](const EpochRecord& e) {
      epochs << e.mean.csv_line(e.epoch) << '\n';
      if (e.epoch == 1 || e.epoch % 10 == 0) {
        std::cout << "split " << s << " epoch " << e.epoch << " total " << e.mean.total << " cycle "
                  << e.mean.cycle_f + e.mean.cycle_b << std::endl;
      }
    };
    TrainResult result;
    try {
      result = train(nets, videos, tc, &best, hooks);
    } catch (const NumericalAbort& e) {
      std::cerr << "numerical abort: " << e.what() << '\n';
      return kNumericalAbort;
    }
    std::ofstream log(dir / "loss_log.csv");
    log << LossBreakdown::csv_header() << '\n';
    for (const auto& line : result.step_log) log << line << '\n';
    nets.save(dir / "final");
    best.save(dir / "best");
    json meta = {{"split", s},
                 {"feature_dim", dims.feature_dim},
                 {"train", splits[s].train},
                 {"test", splits[s].test},
                 {"epochs", result.epochs.size()},
                 {"best_epoch", result.best_epoch},
                 {"converged", result.converged}};
    std::ofstream(dir / "meta.json") << meta.dump(1) << '\n';
    std::cout << "split " << s << ": " << result.epochs.size() << " epochs, " << result.step_log.size()
              << " steps, best epoch " << result.best_epoch << (result.converged ? ", converged" : "") << '\n';
  }
  return kOk;
}

// ---------------------------------------------------------------- eval

void print_reference(std::ostream& out) {
  out << "reference (not reproducible here; needs the real datasets and pretrained-network features):\n"
      << "  published Cycle-SUM F-score: SumMe 41.9, TVSum 57.6\n";
}

int eval_ground_truth(const RunConfig& c) {
  const auto recs = data::load_dataset(c.str("data.dir"));
  const double fraction = c.real("eval.fraction");
  const auto agg = eval::parse_aggregation(c.str("eval.aggregation"));
  std::cout << std::left << std::setw(16) << "video" << "F\n";
  for (const auto& r : recs) {
    if (r.gt.empty()) throw ConfigError("video '" + r.id + "' has no ground truth");
    std::vector<double> fs_;
    for (const auto& ref : data::reference_summaries(r, fraction)) fs_.push_back(eval::f_measure(ref, ref).f_score);
    std::cout << std::setw(16) << r.id << std::fixed << std::setprecision(3) << eval::aggregate_annotators(fs_, agg)
              << '\n';
  }
  return kOk;
}

int cmd_eval(RunConfig c, const std::string& run_arg, const Bindings& flags, bool ground_truth) {
  if (ground_truth) return eval_ground_truth(c);
  if (run_arg.empty()) throw ConfigError("eval needs --run DIR (or --ground-truth)");
  const fs::path run = run_arg;
  if (!fs::exists(run / "config.txt")) throw ConfigError(run.string() + " has no config.txt");
  // The run's own config first, then this invocation's file and flags.
  RunConfig merged;
  merged.merge_file(run / "config.txt");
  flags.apply(merged);
  c = merged;

  const auto recs = data::load_dataset(c.str("data.dir"));
  const double fraction = c.real("eval.fraction");
  const auto agg = eval::parse_aggregation(c.str("eval.aggregation"));
  const std::size_t draws = c.count("eval.draws");
  const std::string which = c.str("eval.checkpoint");
  if (which != "final" && which != "best") throw ConfigError("eval.checkpoint must be final or best");

  std::vector<fs::path> split_dirs;
  for (const auto& entry : fs::directory_iterator(run))
    if (entry.is_directory() && entry.path().filename().string().rfind("split", 0) == 0) split_dirs.push_back(entry.path());
  std::sort(split_dirs.begin(), split_dirs.end());
  if (split_dirs.empty()) throw ConfigError(run.string() + " holds no trained splits");

  std::ostringstream table;
  json records = json::array();
  Rng rng(nn::derive_seed(c.count("seed"), "eval.baseline"));
  double sum_model = 0.0, sum_base = 0.0;
  for (const auto& dir : split_dirs) {
    const json meta = json::parse(std::ifstream(dir / "meta.json"));
    const std::size_t model_d = meta.at("feature_dim").get<std::size_t>();
    const std::size_t data_d = feature_dim_of(recs);
    if (model_d != data_d) {
      throw ConfigError("checkpoint feature dim " + std::to_string(model_d) + " vs dataset feature dim " +
                        std::to_string(data_d));
    }
    auto nets = CycleSumNets::create(model_dims(c, model_d), 0);
    try {
      nets.load(dir / which);
    } catch (const std::exception& e) {
      throw ConfigError("checkpoint " + (dir / which).string() + " does not match the configured model: " + e.what());
    }
    table << dir.filename().string() << " (" << which << " parameters)\n"
          << std::left << std::setw(14) << "video" << std::right << std::setw(8) << "P" << std::setw(8) << "R"
          << std::setw(8) << "F" << std::setw(10) << "frames" << std::setw(8) << "budget" << std::setw(10) << "random"
          << '\n';
    double split_f = 0.0, split_base = 0.0;
    const auto test = meta.at("test").get<std::vector<std::string>>();
    for (const auto& id : test) {
      const auto& r = find_record(recs, id);
      const auto x = score_frames(nets, r.features_tensor());
      const auto ev = data::evaluate_scores(r, x, fraction, agg);
      const auto sel = discretize_scores(x, r.shots(), fraction);
      const std::size_t frames = static_cast<std::size_t>(std::count(sel.frames.begin(), sel.frames.end(), 1));
      const double base = data::random_baseline(r, fraction, agg, draws, rng);
      split_f += ev.result.f_score;
      split_base += base;
      table << std::left << std::setw(14) << id << std::right << std::fixed << std::setprecision(3) << std::setw(8)
            << ev.result.precision << std::setw(8) << ev.result.recall << std::setw(8) << ev.result.f_score
            << std::setw(10) << frames << std::setw(8) << ev.result.budget << std::setw(10) << base << '\n';
      records.push_back({{"split", dir.filename().string()},
                         {"id", id},
                         {"precision", ev.result.precision},
                         {"recall", ev.result.recall},
                         {"f_score", ev.result.f_score},
                         {"frames_selected", frames},
                         {"budget", ev.result.budget},
                         {"random_f", base}});
    }
    split_f /= static_cast<double>(test.size());
    split_base /= static_cast<double>(test.size());
    table << "mean F " << split_f << ", random baseline " << split_base << "\n\n";
    sum_model += split_f;
    sum_base += split_base;
  }
  const double n = static_cast<double>(split_dirs.size());
  table << "mean over " << split_dirs.size() << " split(s): F " << sum_model / n << ", random baseline "
        << sum_base / n << " (budget " << fraction * 100 << "% of frames, " << c.str("eval.aggregation")
        << " over annotators, " << draws << " random draws)\n";
  print_reference(table);

  std::cout << table.str();
  std::ofstream(fresh_file(run, "eval", ".txt")) << table.str();
  json report = {{"videos", records}, {"mean_f", sum_model / n}, {"random_f", sum_base / n},
                 {"reference", {{"SumMe", 41.9}, {"TVSum", 57.6}}}};
  std::ofstream(fresh_file(run, "eval", ".json")) << report.dump(1) << '\n';
  return kOk;
}

// ---------------------------------------------------------------- verify-math

struct Row {
  std::string name;
  double observed;
  double bound;
  bool pass;
};

int cmd_verify_math(const RunConfig& c) {
  const std::size_t joints = c.count("math.joints");
  const std::size_t max_alpha = c.count("math.max_alphabet");
  const std::size_t pairs = c.count("math.pairs");
  if (max_alpha < 2) throw ConfigError("math.max_alphabet must be >= 2");
  Rng rng(c.count("seed"));
  const double ln2 = std::numbers::ln2;

  double mi_gap = 0, dec_gap = 0, min_mi = 0, prod_mi = 0;
  for (std::size_t i = 0; i < joints; ++i) {
    const auto n = 2 + rng.below(max_alpha - 1), m = 2 + rng.below(max_alpha - 1);
    auto j = info::DiscreteJoint::random(n, m, rng, i % 4 == 3 ? 0.3 : 0.0);
    mi_gap = std::max(mi_gap, std::fabs(info::mutual_information(j) - info::conditional_kl_form(j)));
    dec_gap = std::max(dec_gap, info::verify_symmetric_decomposition(j).gap);
    min_mi = std::min(min_mi, info::mutual_information(j));
    auto p = info::DiscreteJoint::product(j.marginal_o(), j.marginal_s());
    prod_mi = std::max(prod_mi, std::fabs(info::mutual_information(p)));
  }
  double conj_gap = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const double t = -std::exp(rng.uniform(-5.0, 5.0));
    conj_gap = std::max(conj_gap, std::fabs(info::fenchel_log_conjugate(t) - info::fenchel_log_conjugate_grid(t)));
  }
  double jsd_gap = 0, grid_gap = 0, dominance = -1e300, range_excess = 0;
  std::size_t violations = 0;
  double worst_kl = 0, worst_neg_sup = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    auto pair = info::DiscretePair::random(2 + rng.below(max_alpha - 1), rng);
    auto sup = info::gan_bound_sup(pair);
    jsd_gap = std::max(jsd_gap, std::fabs(sup.sup_value - sup.jsd_identity));
    grid_gap = std::max(grid_gap, std::fabs(sup.sup_value - info::gan_bound_sup_grid(pair)));
    range_excess = std::max({range_excess, sup.sup_value, -2 * ln2 - sup.sup_value});
    std::vector<double> T(pair.p.size());
    for (auto& t : T) t = rng.uniform(1e-6, 1 - 1e-6);
    dominance = std::max(dominance, info::gan_bound_value(pair, T) - sup.sup_value);
    auto probe = info::probe_kl_bound(pair);
    if (probe.violated) {
      ++violations;
      if (probe.kl_pq > worst_kl) worst_kl = probe.kl_pq, worst_neg_sup = probe.negated_sup;
    }
  }

  const std::vector<Row> rows = {
      {"MI direct vs conditional-KL form", mi_gap, 1e-12, mi_gap <= 1e-12},
      {"symmetric decomposition gap", dec_gap, 1e-10, dec_gap <= 1e-10},
      {"MI non-negative (min)", min_mi, 0.0, min_mi >= -1e-15},
      {"MI of product joints", prod_mi, 1e-12, prod_mi <= 1e-12},
      {"log conjugate vs grid sup", conj_gap, 1e-6, conj_gap <= 1e-6},
      {"GAN sup vs -2ln2 + 2 JSD", jsd_gap, 1e-10, jsd_gap <= 1e-10},
      {"GAN sup vs per-point grid", grid_gap, 1e-6, grid_gap <= 1e-6},
      {"value(T) - sup (max)", dominance, 0.0, dominance <= 1e-12},
      {"sup outside [-2ln2, 0] (max)", range_excess, 0.0, range_excess <= 1e-12},
  };
  std::cout << "verify-math: " << joints << " joints (alphabets up to " << max_alpha << "x" << max_alpha << "), "
            << pairs << " pairs, seed " << c.str("seed") << "\n\n"
            << std::left << std::setw(36) << "property" << std::setw(14) << "observed" << std::setw(10) << "bound"
            << "result\n";
  bool ok = true;
  for (const auto& r : rows) {
    ok = ok && r.pass;
    std::cout << std::setw(36) << r.name << std::setw(14) << std::scientific << std::setprecision(2) << r.observed
              << std::setw(10) << r.bound << (r.pass ? "PASS" : "FAIL") << '\n';
  }
  std::cout << "\ninformational: claimed bound KL(p||q) <= -sup (not asserted)\n"
            << "  violated on " << violations << " of " << pairs << " random pairs";
  if (violations) {
    std::cout << std::defaultfloat << "; largest KL " << worst_kl << " against a bound of " << worst_neg_sup;
  }
  std::cout << "\n  (-sup never exceeds 2 ln 2 while KL is unbounded; not a failure)\n";
  return ok ? kOk : kVerifyFailed;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const RunConfig& c) {
  if (precision_of(c.str("gradcheck.precision")) != ad::Precision::f64) {
    std::cerr << "gradcheck refuses 32-bit mode: finite differences at h=1e-5 need 64-bit values; rerun with "
                 "--precision f64\n";
    return kConfigError;
  }
  const std::string term = c.str("gradcheck.term");
  std::vector<std::string> terms;
  if (term == "all") {
    terms.assign(std::begin(kLossTermNames), std::end(kLossTermNames));
  } else if (std::find(std::begin(kLossTermNames), std::end(kLossTermNames), term) != std::end(kLossTermNames)) {
    terms.push_back(term);
  } else {
    throw ConfigError("unknown loss term '" + term + "'");
  }
  const double h = c.real("gradcheck.h"), tol = c.real("gradcheck.tol");
  const std::uint64_t seed = c.count("seed");

  ModelDims dims;
  dims.feature_dim = 3;
  dims.hidden = 4;
  dims.z_dim = 2;
  auto nets = CycleSumNets::create(dims, seed);
  Rng vrng(seed);
  std::vector<double> v(4 * 3);
  for (auto& x : v) x = vrng.uniform(-1.0, 1.0);
  const auto o = ad::Tensor::constant({4, 3}, v);
  std::size_t n_params = 0;
  for (const auto* s : nets.stores()) n_params += s->num_values();
  std::cout << "toy nets k=4 d=3 h=4 z=2 (" << n_params << " parameters), h=" << h << ", tol=" << tol << "\n\n"
            << std::left << std::setw(10) << "term" << std::setw(10) << "network" << std::setw(14) << "max rel err"
            << std::setw(14) << "net of roundoff" << "result\n";
  const LossWeights weights;
  bool ok = true;
  double worst = 0.0, worst_net = 0.0;
  for (const auto& t : terms) {
    for (std::size_t i = 0; i < 5; ++i) {
      auto f = [&] {
        Rng rng(nn::derive_seed(seed, "gradcheck"));
        return total_loss(full_cycle(nets, o, rng, weights.cycle_options()), weights).term(t);
      };
      const auto rep = ad::grad_check(f, *nets.stores()[i], h, tol);
      ok = ok && rep.pass;
      worst = std::max(worst, rep.max_rel_error);
      worst_net = std::max(worst_net, rep.max_rel_error_net);
      std::cout << std::setw(10) << t << std::setw(10) << CycleSumNets::kStoreNames[i] << std::setw(14)
                << std::scientific << std::setprecision(2) << rep.max_rel_error << std::setw(14)
                << rep.max_rel_error_net << (rep.pass ? "PASS" : "FAIL") << '\n';
    }
  }
  std::cout << "\noverall max rel err " << worst << ": " << (ok ? "PASS" : "FAIL") << '\n'
            << "net of difference-quotient roundoff " << worst_net << '\n';
  return ok ? kOk : kVerifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-SUM video summarization: synthetic data, training, evaluation, checks"};
  app.require_subcommand(1);
  Bindings flags;
  std::string run_arg, splits_out;
  bool ground_truth = false;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config_file, "flat key = value file (dotted keys)");
    flags.bind(sub, "--seed", "seed");
  };

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with planted ground truth");
  common(synth);
  flags.bind(synth, "--out,--data", "data.dir");
  flags.bind(synth, "--videos", "synth.videos");
  flags.bind(synth, "--frames", "synth.frames");
  flags.bind(synth, "--dim", "synth.dim");
  flags.bind(synth, "--events", "synth.events");
  flags.bind(synth, "--salience", "synth.salience");
  flags.bind(synth, "--noise", "synth.noise");
  flags.bind(synth, "--spread", "synth.spread");

  auto* splits = app.add_subcommand("splits", "write five seeded 80/20 splits for a dataset");
  common(splits);
  flags.bind(splits, "--data", "data.dir");
  splits->add_option("--out", splits_out, "splits file (default <data>/splits.json)");

  auto* trn = app.add_subcommand("train", "train on one split (or all five)");
  common(trn);
  flags.bind(trn, "--data", "data.dir");
  flags.bind(trn, "--splits", "data.splits");
  flags.bind(trn, "--split", "train.split");
  flags.bind(trn, "--all-splits", "train.all_splits", "true|false");
  flags.bind(trn, "--variant", "train.variant", "cycle-sum|c|1g|2g|gf|gb");
  flags.bind(trn, "--max-epochs", "train.max_epochs");
  flags.bind(trn, "--lr", "train.lr");
  flags.bind(trn, "--n-iters", "train.n_generator_iters");
  flags.bind(trn, "--clip", "train.clip_c");
  flags.bind(trn, "--pretrain-epochs", "train.pretrain_epochs");
  flags.bind(trn, "--precision", "train.precision");
  flags.bind(trn, "--hidden", "model.hidden");
  flags.bind(trn, "--z-dim", "model.z_dim");
  flags.bind(trn, "--runs", "run.root");

  auto* ev = app.add_subcommand("eval", "F-measure report for a trained run");
  common(ev);
  ev->add_option("--run", run_arg, "run directory written by train");
  ev->add_flag("--ground-truth", ground_truth, "score each reference summary against itself");
  flags.bind(ev, "--data", "data.dir");
  flags.bind(ev, "--fraction", "eval.fraction");
  flags.bind(ev, "--aggregation", "eval.aggregation", "mean|max");
  flags.bind(ev, "--draws", "eval.draws");
  flags.bind(ev, "--checkpoint", "eval.checkpoint", "final|best");

  auto* vm = app.add_subcommand("verify-math", "brute-force checks of the information-theoretic identities");
  common(vm);
  flags.bind(vm, "--joints", "math.joints");
  flags.bind(vm, "--max-alphabet", "math.max_alphabet");
  flags.bind(vm, "--pairs", "math.pairs");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every loss term on toy nets");
  common(gc);
  flags.bind(gc, "--term", "gradcheck.term");
  flags.bind(gc, "--precision", "gradcheck.precision");
  flags.bind(gc, "--tol", "gradcheck.tol");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig cfg;
    flags.apply(cfg);
    if (*synth) return cmd_synth(cfg);
    if (*splits) return cmd_splits(cfg, splits_out);
    if (*trn) return cmd_train(cfg);
    if (*ev) return cmd_eval(cfg, run_arg, flags, ground_truth);
    if (*vm) return cmd_verify_math(cfg);
    if (*gc) return cmd_gradcheck(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const data::DataError& e) {
    std::cerr << "data error (" << data::to_string(e.kind()) << "): " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
