// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>

#include "CLI11.hpp"
#include "nvil/checkpoint.hpp"
#include "nvil/data.hpp"
#include "nvil/evaluate.hpp"
#include "nvil/metrics.hpp"
#include "nvil/wake_sleep.hpp"

namespace nvil {

std::vector<std::size_t> RunSpec::widths_visible_first() const {
  std::vector<std::size_t> w(arch_deepest_first.rbegin(), arch_deepest_first.rend());
  return w;
}

namespace {

std::vector<std::size_t> parse_arch(const std::string& text) {
  std::vector<std::size_t> widths;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t dash = std::min(text.find('-', pos), text.size());
    const std::string tok = text.substr(pos, dash - pos);
    std::size_t consumed = 0;
    long long w = 0;
    try {
      w = std::stoll(tok, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != tok.size() || w < 1) {
      throw std::invalid_argument("cli: malformed architecture string '" + text +
                                  "' (expected dash-separated widths like 200-200)");
    }
    widths.push_back(static_cast<std::size_t>(w));
    pos = dash + 1;
  }
  return widths;
}

struct RawOptions {
  std::string arch;
  double lr = -1.0;  // resolved per command
  double baseline_lr = -1.0;
  bool no_idb = false;
  bool no_scalar = false;
  bool no_vn = false;
  bool no_local = false;
};

void add_data_flags(CLI::App* cmd, RunSpec& spec, bool required) {
  auto* d = cmd->add_option("--data", spec.data_path, "input data file");
  if (required) d->required();
  cmd->add_option("--data-format", spec.data_format, "idx | dense-text | bow")
      ->check(CLI::IsMember({"idx", "dense-text", "bow"}));
  cmd->add_option_function<std::string>(
         "--visible",
         [&spec](const std::string& v) {
           spec.visible = (v == "multinomial") ? VisibleKind::multinomial : VisibleKind::bernoulli;
         },
         "bernoulli | multinomial")
      ->check(CLI::IsMember({"bernoulli", "multinomial"}));
}

void add_arch_flags(CLI::App* cmd, RunSpec& spec, RawOptions& raw, bool required) {
  auto* a = cmd->add_option("--arch", raw.arch,
                            "latent layer widths, deepest first (e.g. 200-200-500)");
  if (required) a->required();
  cmd->add_flag("--autoreg-latent", spec.autoreg_latent,
                "autoregressive connections within latent layers of the model");
  cmd->add_flag("--autoreg-inference", spec.autoreg_inference,
                "autoregressive connections within inference network layers");
}

void add_train_flags(CLI::App* cmd, RunSpec& spec, RawOptions& raw) {
  cmd->add_option("--lr", raw.lr, "model learning rate (inference uses lr/5)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--batch", spec.train.minibatch_size, "minibatch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--alpha", spec.train.alpha, "signal statistics smoothing factor")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--bound-samples", spec.train.bound_samples,
                  "posterior samples per case for bound estimates")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-updates", spec.train.max_updates, "number of minibatch updates");
  cmd->add_option("--eval-interval", spec.train.eval_interval, "updates between evaluations")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--valid", spec.n_valid, "validation cases held out of the training set");
}

}  // namespace

RunSpec parse_args(const std::vector<std::string>& args) {
  RunSpec spec;
  RawOptions raw;

  CLI::App app{"nvil: score-function variational training for belief networks"};
  app.require_subcommand(1);

  auto* tn = app.add_subcommand("train-nvil", "train model and inference network jointly");
  add_arch_flags(tn, spec, raw, true);
  add_data_flags(tn, spec, true);
  add_train_flags(tn, spec, raw);
  tn->add_option("--baseline-lr", raw.baseline_lr, "baseline network learning rate")
      ->check(CLI::PositiveNumber);
  tn->add_flag("--no-idb", raw.no_idb, "disable the input-dependent baseline");
  tn->add_flag("--no-scalar-baseline", raw.no_scalar, "disable the running-mean baseline");
  tn->add_flag("--no-variance-norm", raw.no_vn, "disable variance normalization");
  tn->add_flag("--no-local-signals", raw.no_local, "use the global learning signal everywhere");
  tn->add_option("--seed", spec.train.seed, "random seed");
  tn->add_option("--ckpt", spec.ckpt_path, "checkpoint output path (best validation snapshot)");
  tn->add_option("--metrics", spec.metrics_path, "metrics CSV output path");

  auto* tw = app.add_subcommand("train-ws", "train with the wake-sleep algorithm");
  add_arch_flags(tw, spec, raw, true);
  add_data_flags(tw, spec, true);
  add_train_flags(tw, spec, raw);
  tw->add_option("--seed", spec.train.seed, "random seed");
  tw->add_option("--ckpt", spec.ckpt_path, "checkpoint output path (best validation snapshot)");
  tw->add_option("--metrics", spec.metrics_path, "metrics CSV output path");

  auto* ev = app.add_subcommand("eval", "estimate the bound of a checkpoint on a dataset");
  add_data_flags(ev, spec, true);
  ev->add_option("--ckpt", spec.ckpt_path, "checkpoint to evaluate")->required();
  ev->add_option("--bound-samples", spec.train.bound_samples, "samples per case")
      ->check(CLI::PositiveNumber);
  auto* ev_valid = ev->add_option(
      "--valid", spec.n_valid, "if > 0, evaluate the seeded validation split of this size");
  ev->add_option("--seed", spec.train.seed, "random seed");

  auto* vr = app.add_subcommand("variance-report",
                                "estimator variance per variance-reduction configuration");
  add_data_flags(vr, spec, true);
  vr->add_option("--ckpt", spec.ckpt_path, "checkpoint to analyse")->required();
  vr->add_option("--configs", spec.configs, "comma list of none|scalar|idb|vn|local combos");
  vr->add_option("--resamples", spec.resamples, "resamples per configuration")
      ->check(CLI::PositiveNumber);
  vr->add_option("--batch", spec.train.minibatch_size, "snapshot batch size")
      ->check(CLI::PositiveNumber);
  vr->add_option("--seed", spec.train.seed, "random seed");
  vr->add_option("--metrics", spec.metrics_path, "CSV output path (stdout when absent)");

  auto* sa = app.add_subcommand("sample", "write ancestral samples from a checkpoint");
  sa->add_option("--ckpt", spec.ckpt_path, "checkpoint to sample from")->required();
  sa->add_option_function<std::string>(
        "--visible",
        [&spec](const std::string& v) {
          spec.visible = (v == "multinomial") ? VisibleKind::multinomial : VisibleKind::bernoulli;
        },
        "bernoulli | multinomial")
      ->check(CLI::IsMember({"bernoulli", "multinomial"}));
  sa->add_option("--n-samples", spec.n_samples, "number of samples")->check(CLI::PositiveNumber);
  sa->add_option("--doc-length", spec.doc_length, "document length for multinomial visibles");
  sa->add_option("--seed", spec.train.seed, "random seed");
  sa->add_option("--out", spec.out_path, "dense-text output path")->required();

  std::vector<const char*> argv;
  argv.push_back("nvil");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    throw HelpRequested{sub->help()};
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(std::string("cli: ") + e.what());
  }

  if (tn->parsed()) spec.command = Command::train_nvil;
  if (tw->parsed()) spec.command = Command::train_ws;
  if (ev->parsed()) {
    spec.command = Command::eval;
    if (ev_valid->count() == 0) spec.n_valid = 0;  // default: the whole file
  }
  if (vr->parsed()) spec.command = Command::variance_report;
  if (sa->parsed()) spec.command = Command::sample;

  if (!raw.arch.empty()) spec.arch_deepest_first = parse_arch(raw.arch);

  const bool is_train = spec.command == Command::train_nvil || spec.command == Command::train_ws;
  if (is_train) {
    const double lr = raw.lr > 0.0 ? raw.lr : (spec.command == Command::train_nvil ? 3e-4 : 1e-4);
    spec.train.model_lr = lr;
    spec.train.inference_lr = lr / 5.0;
    spec.train.baseline_lr = raw.baseline_lr > 0.0 ? raw.baseline_lr : spec.train.inference_lr;
    spec.train.flags.idb = !raw.no_idb;
    spec.train.flags.scalar_baseline = !raw.no_scalar;
    spec.train.flags.variance_norm = !raw.no_vn;
    spec.train.flags.local_signals = !raw.no_local;
  }
  if ((spec.visible == VisibleKind::multinomial) != (spec.data_format == "bow") &&
      !spec.data_path.empty()) {
    throw std::invalid_argument(
        "cli: multinomial visibles require --data-format bow (and vice versa)");
  }
  if (spec.command == Command::sample && spec.visible == VisibleKind::multinomial &&
      spec.doc_length == 0) {
    throw std::invalid_argument("cli: sample with multinomial visibles needs --doc-length");
  }
  return spec;
}

namespace {

struct LoadedData {
  std::optional<BinaryDataset> binary;
  std::optional<BowDataset> bow;
  DatasetView view() const { return binary ? view_of(*binary) : view_of(*bow); }
};

LoadedData load_data(const RunSpec& spec) {
  LoadedData d;
  if (spec.data_format == "bow") {
    d.bow = load_bow(spec.data_path);
  } else {
    d.binary = load_binary_matrix(
        spec.data_path,
        spec.data_format == "idx" ? BinaryFormat::idx : BinaryFormat::dense_text);
  }
  return d;
}

struct SplitData {
  LoadedData train;
  LoadedData valid;
};

SplitData split_data(LoadedData&& all, std::size_t n_valid, std::uint64_t seed) {
  SplitData s;
  if (all.binary) {
    auto [tr, va] = split_validation(*all.binary, n_valid, seed);
    s.train.binary = std::move(tr);
    s.valid.binary = std::move(va);
  } else {
    auto [tr, va] = split_validation(*all.bow, n_valid, seed);
    s.train.bow = std::move(tr);
    s.valid.bow = std::move(va);
  }
  return s;
}

}  // namespace

CheckpointBundle load_checkpoint_bundle(const std::string& path, VisibleKind kind) {
  CheckpointFile file = CheckpointFile::read(path);
  CheckpointBundle b;
  b.model.visible_kind = kind;

  auto dims_of = [&](const std::string& name) -> const std::vector<std::size_t>& {
    const auto* rec = file.find(name);
    if (!rec) throw std::runtime_error("checkpoint: missing record '" + name + "'");
    return rec->dims;
  };

  for (std::size_t k = 0; file.has("model.layer" + std::to_string(k) + ".weights"); ++k) {
    const std::string base = "model.layer" + std::to_string(k);
    SbnLayer layer;
    const auto& wd = dims_of(base + ".weights");
    layer.weights = Matrix(wd[0], wd[1]);
    layer.biases.assign(wd[0], 0.0);
    if (file.has(base + ".ar_weights")) {
      layer.ar = ArBlock::lower_triangular(wd[0]);
    }
    b.model.layers.push_back(std::move(layer));
  }
  if (b.model.layers.empty()) {
    throw std::runtime_error("checkpoint: no model layers in '" + path + "'");
  }
  b.model.prior_logits.assign(dims_of("model.prior_logits")[0], 0.0);
  if (file.has("model.prior_ar_weights")) {
    b.model.prior_ar = ArBlock::lower_triangular(b.model.prior_logits.size());
  }

  for (std::size_t k = 0; file.has("inference.layer" + std::to_string(k) + ".weights"); ++k) {
    const std::string base = "inference.layer" + std::to_string(k);
    SbnLayer layer;
    const auto& wd = dims_of(base + ".weights");
    layer.weights = Matrix(wd[0], wd[1]);
    layer.biases.assign(wd[0], 0.0);
    if (file.has(base + ".ar_weights")) {
      layer.ar = ArBlock::lower_triangular(wd[0]);
    }
    b.inference.layers.push_back(std::move(layer));
  }
  if (b.inference.layers.empty()) {
    throw std::runtime_error("checkpoint: no inference layers in '" + path + "'");
  }
  b.inference.input_mean.assign(dims_of("inference.input_mean")[0], 0.0);

  if (file.has("baseline.0.w1")) {
    BaselineState state;
    for (std::size_t s = 0; file.has("baseline." + std::to_string(s) + ".w1"); ++s) {
      const auto& wd = dims_of("baseline." + std::to_string(s) + ".w1");
      BaselineState::PerSignal ps;
      ps.mlp.w1 = Matrix(wd[0], wd[1]);
      ps.mlp.b1.assign(wd[0], 0.0);
      ps.mlp.w2.assign(wd[0], 0.0);
      state.signals.push_back(std::move(ps));
    }
    b.baselines = std::move(state);
  }

  file.bind(b.model.state_refs());
  file.bind(b.inference.state_refs());
  if (b.baselines) file.bind(b.baselines->state_refs());
  file.require_fully_consumed();
  b.model.validate();
  b.inference.validate();
  return b;
}

namespace {

void save_bundle(ModelParams& model, InferenceParams& inf, BaselineState* state,
                 const std::string& path) {
  auto refs = model.state_refs();
  const auto inf_refs = inf.state_refs();
  refs.insert(refs.end(), inf_refs.begin(), inf_refs.end());
  if (state) {
    const auto b_refs = state->state_refs();
    refs.insert(refs.end(), b_refs.begin(), b_refs.end());
  }
  checkpoint_save(refs, path);
}

int run_train(const RunSpec& spec) {
  auto all = load_data(spec);
  if (all.view().n_cases <= spec.n_valid) {
    throw std::invalid_argument("cli: dataset too small for the requested validation split");
  }
  auto split = split_data(std::move(all), spec.n_valid, spec.train.seed);
  const auto train_view = split.train.view();
  const auto valid_view = split.valid.view();

  const auto widths = spec.widths_visible_first();
  if (widths.empty()) throw std::invalid_argument("cli: --arch is required for training");
  RngStream init_rng(spec.train.seed, stream_key(0x696E6974));
  ModelParams model = init_model(train_view.dim, widths, spec.visible, spec.autoreg_latent,
                                 init_rng.derive(1));
  InferenceParams inf =
      init_inference(train_view.dim, widths, spec.autoreg_inference, init_rng.derive(2));
  inf.input_mean = *train_view.mean;

  TrainResult result;
  if (spec.command == Command::train_nvil) {
    BaselineState state = init_baseline_state(
        baseline_input_dims(inf, spec.train.flags.local_signals), spec.train.baseline_hidden,
        spec.train.alpha, init_rng.derive(3));
    result = train(std::move(model), std::move(inf), std::move(state), train_view, valid_view,
                   spec.train);
  } else {
    result = train_ws(std::move(model), std::move(inf), train_view, valid_view, spec.train);
  }

  if (!spec.metrics_path.empty()) write_metrics_csv(result.metrics, spec.metrics_path);
  if (!spec.ckpt_path.empty()) {
    save_bundle(result.best_model, result.best_inference,
                spec.command == Command::train_nvil ? &result.best_baselines : nullptr,
                spec.ckpt_path);
  }
  std::printf("best_valid_bound %s at update %zu\n", format_g9(result.best_valid_bound).c_str(),
              result.best_update);
  return 0;
}

int run_eval(const RunSpec& spec) {
  auto bundle = load_checkpoint_bundle(spec.ckpt_path, spec.visible);
  auto all = load_data(spec);
  DatasetView view;
  SplitData split;
  if (spec.n_valid > 0) {
    split = split_data(std::move(all), spec.n_valid, spec.train.seed);
    view = split.valid.view();
  } else {
    split.train = std::move(all);
    view = split.train.view();
  }
  RngStream rng(spec.train.seed, stream_key(0x6576616C));
  const auto est =
      dataset_bound(bundle.model, bundle.inference, view, spec.train.bound_samples, rng);
  std::printf("cases %zu samples %zu bound %s stderr %s\n", view.n_cases, est.samples_per_case,
              format_g9(est.mean).c_str(), format_g9(est.std_error).c_str());
  if (spec.visible == VisibleKind::multinomial) {
    const BowDataset& corpus = spec.n_valid > 0 ? *split.valid.bow : *split.train.bow;
    const double perp =
        perplexity(bundle.model, bundle.inference, corpus, spec.train.bound_samples, rng);
    std::printf("perplexity %s\n", format_g9(perp).c_str());
  }
  return 0;
}

int run_variance_report(const RunSpec& spec) {
  auto bundle = load_checkpoint_bundle(spec.ckpt_path, spec.visible);
  if (!bundle.baselines) {
    // No baseline records (e.g. a wake-sleep checkpoint): fall back to a
    // zero state so baseline-free configurations still run.
    bundle.baselines = init_baseline_state(baseline_input_dims(bundle.inference, true), 100,
                                           0.8, RngStream(0, 0), 0.0);
  }
  auto all = load_data(spec);
  const auto view = all.view();
  RngStream rng(spec.train.seed, stream_key(0x76726570));
  auto batch_rng = rng.derive(1);
  const auto idx = draw_minibatch(view.n_cases, spec.train.minibatch_size, batch_rng);
  std::vector<Observation> batch(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) view.fill_case(idx[b], batch[b]);

  const auto report =
      variance_report(bundle.model, bundle.inference, *bundle.baselines, batch,
                      parse_variance_configs(spec.configs), spec.resamples, rng.derive(2));
  const std::string csv = variance_report_csv(report);
  if (spec.metrics_path.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    std::ofstream f(spec.metrics_path, std::ios::binary);
    if (!f) throw std::runtime_error("cli: cannot open '" + spec.metrics_path + "'");
    f << csv;
  }
  return 0;
}

int run_sample(const RunSpec& spec) {
  auto bundle = load_checkpoint_bundle(spec.ckpt_path, spec.visible);
  RngStream rng(spec.train.seed, stream_key(0x73616D70));
  std::ofstream f(spec.out_path, std::ios::binary);
  if (!f) throw std::runtime_error("cli: cannot open '" + spec.out_path + "' for writing");
  std::optional<std::size_t> len;
  if (spec.visible == VisibleKind::multinomial) len = spec.doc_length;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    auto sample_rng = rng.derive(i);
    const auto s = sample_ancestral(bundle.model, sample_rng, len);
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      if (j) f << ' ';
      f << static_cast<long long>(s.x[j]);
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("cli: write failed for '" + spec.out_path + "'");
  return 0;
}

}  // namespace

int run(const RunSpec& spec) {
  try {
    switch (spec.command) {
      case Command::train_nvil:
      case Command::train_ws:
        return run_train(spec);
      case Command::eval:
        return run_eval(spec);
      case Command::variance_report:
        return run_variance_report(spec);
      case Command::sample:
        return run_sample(spec);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

int main_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    return run(parse_args(args));
  } catch (const HelpRequested& h) {
    std::fputs(h.text.c_str(), stdout);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace nvil
