// Apache License, Version 2.0, refer to LICENSE.txt
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "nvil/cli.hpp"
#include "nvil/data.hpp"
#include "nvil/evaluate.hpp"

using namespace nvil;
using namespace nviltest;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("nvilkit-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Small structured binary dataset written as dense text.
std::string write_dataset(const TempDir& dir, int cases, std::uint64_t seed) {
  auto truth = make_tiny(8, {3}, 1.8, seed).model;
  BinaryDataset data;
  data.dim = 8;
  RngStream gen(seed, 1);
  for (int i = 0; i < cases; ++i) {
    const auto s = sample_ancestral(truth, gen);
    for (double b : s.x) data.rows.push_back(static_cast<std::uint8_t>(b));
  }
  data.recompute_mean();
  const auto path = dir.file("data.txt");
  save_dense_text(data, path);
  return path;
}

}  // namespace

TEST_CASE("parse_args applies the training defaults") {
  const auto spec = parse_args({"train-nvil", "--arch", "200", "--data", "d.txt"});
  CHECK(spec.command == Command::train_nvil);
  REQUIRE(spec.arch_deepest_first == std::vector<std::size_t>{200});
  CHECK(spec.train.minibatch_size == 20);
  CHECK(spec.train.alpha == doctest::Approx(0.8));
  CHECK(spec.train.bound_samples == 10);
  CHECK(spec.train.model_lr == doctest::Approx(3e-4));
  CHECK(spec.train.inference_lr == doctest::Approx(3e-4 / 5.0));
  CHECK(spec.train.baseline_lr == doctest::Approx(3e-4 / 5.0));
  CHECK(spec.n_valid == 100);
  CHECK(spec.train.flags.idb);
  CHECK(spec.train.flags.scalar_baseline);
  CHECK(spec.train.flags.variance_norm);
  CHECK(spec.train.flags.local_signals);
}

TEST_CASE("parse_args architecture convention is deepest first") {
  const auto spec = parse_args({"train-nvil", "--arch", "200-200-500", "--data", "d.txt"});
  CHECK(spec.arch_deepest_first == std::vector<std::size_t>{200, 200, 500});
  CHECK(spec.widths_visible_first() == std::vector<std::size_t>{500, 200, 200});
}

TEST_CASE("parse_args rejects malformed input") {
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "200", "--data", "d.txt", "--lr", "0"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "200x3", "--data", "d.txt"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "200-", "--data", "d.txt"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "200", "--data", "d.txt", "--bogus"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_args({"explode"}), std::invalid_argument);
  CHECK_THROWS_AS(parse_args({}), std::invalid_argument);
  // Multinomial visibles and bag-of-words format imply each other.
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "8", "--data", "d.txt", "--visible",
                              "multinomial"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_args({"train-nvil", "--arch", "8", "--data", "d.bow", "--data-format",
                              "bow"}),
                  std::invalid_argument);
}

TEST_CASE("parse_args wake-sleep defaults and flag overrides") {
  const auto ws = parse_args({"train-ws", "--arch", "50", "--data", "d.txt"});
  CHECK(ws.command == Command::train_ws);
  CHECK(ws.train.model_lr == doctest::Approx(1e-4));
  CHECK(ws.train.inference_lr == doctest::Approx(2e-5));

  const auto spec = parse_args({"train-nvil", "--arch", "20-10", "--data", "d.txt", "--lr",
                                "0.003", "--baseline-lr", "0.01", "--no-idb",
                                "--no-variance-norm", "--batch", "5", "--seed", "77",
                                "--autoreg-latent", "--autoreg-inference"});
  CHECK(spec.train.model_lr == doctest::Approx(0.003));
  CHECK(spec.train.baseline_lr == doctest::Approx(0.01));
  CHECK_FALSE(spec.train.flags.idb);
  CHECK(spec.train.flags.scalar_baseline);
  CHECK_FALSE(spec.train.flags.variance_norm);
  CHECK(spec.train.minibatch_size == 5);
  CHECK(spec.train.seed == 77);
  CHECK(spec.autoreg_latent);
  CHECK(spec.autoreg_inference);
}

TEST_CASE("help is surfaced separately from errors") {
  CHECK_THROWS_AS(parse_args({"--help"}), HelpRequested);
  CHECK_THROWS_AS(parse_args({"train-nvil", "--help"}), HelpRequested);
}

TEST_CASE("run with zero updates writes the initial metrics row and exits cleanly") {
  TempDir dir;
  const auto data = write_dataset(dir, 120, 500);
  auto spec = parse_args({"train-nvil", "--arch", "4", "--data", data, "--max-updates", "0",
                          "--valid", "20", "--metrics", dir.file("m.csv"), "--ckpt",
                          dir.file("m.ckpt")});
  CHECK(run(spec) == 0);
  const auto csv = slurp(dir.file("m.csv"));
  CHECK(csv.rfind("update,train_bound,valid_bound,signal_mean,signal_var,grad_norm_theta,"
                  "grad_norm_phi\n0,",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
}

TEST_CASE("identical runs produce byte-identical metrics") {
  TempDir dir;
  const auto data = write_dataset(dir, 150, 501);
  const std::vector<std::string> base{"train-nvil", "--arch",  "6",   "--data",
                                      data,         "--valid", "30",  "--max-updates",
                                      "120",        "--eval-interval", "40",
                                      "--seed",     "9"};
  auto with_metrics = [&](const std::string& out) {
    auto args = base;
    args.push_back("--metrics");
    args.push_back(out);
    return parse_args(args);
  };
  CHECK(run(with_metrics(dir.file("a.csv"))) == 0);
  CHECK(run(with_metrics(dir.file("b.csv"))) == 0);
  CHECK(slurp(dir.file("a.csv")) == slurp(dir.file("b.csv")));
}

TEST_CASE("eval reproduces the training log's best validation bound") {
  TempDir dir;
  const auto data = write_dataset(dir, 200, 502);
  auto spec = parse_args({"train-nvil", "--arch", "4", "--data", data, "--valid", "40",
                          "--max-updates", "400", "--eval-interval", "100", "--lr", "0.01",
                          "--seed", "3", "--metrics", dir.file("t.csv"), "--ckpt",
                          dir.file("t.ckpt")});
  REQUIRE(run(spec) == 0);

  // Best validation bound from the metrics log.
  std::ifstream csv(dir.file("t.csv"));
  std::string line;
  std::getline(csv, line);  // header
  double best = -1e300;
  while (std::getline(csv, line)) {
    std::size_t p = line.find(',');
    p = line.find(',', p + 1);
    const double vb = std::stod(line.substr(p + 1));
    best = std::max(best, vb);
  }

  // Recreate eval's computation: same split, the stored best snapshot.
  const auto bundle = load_checkpoint_bundle(dir.file("t.ckpt"), VisibleKind::bernoulli);
  REQUIRE(bundle.baselines.has_value());
  const auto all = load_binary_matrix(data, BinaryFormat::dense_text);
  const auto [train_part, valid_part] = split_validation(all, 40, 3);
  const auto est = dataset_bound(bundle.model, bundle.inference, view_of(valid_part), 10,
                                 RngStream(3, stream_key(0x6576616C)));
  CHECK(std::fabs(est.mean - best) <= 2.0 * std::sqrt(2.0) * est.std_error + 1e-9);

  // The eval command itself runs on the same inputs.
  auto eval_spec = parse_args({"eval", "--data", data, "--ckpt", dir.file("t.ckpt"),
                               "--valid", "40", "--seed", "3"});
  CHECK(run(eval_spec) == 0);
}

TEST_CASE("sample writes dense text that reloads") {
  TempDir dir;
  const auto data = write_dataset(dir, 120, 503);
  auto spec = parse_args({"train-nvil", "--arch", "4", "--data", data, "--max-updates", "10",
                          "--valid", "20", "--ckpt", dir.file("s.ckpt")});
  REQUIRE(run(spec) == 0);
  auto sample_spec = parse_args({"sample", "--ckpt", dir.file("s.ckpt"), "--n-samples", "25",
                                 "--out", dir.file("samples.txt"), "--seed", "4"});
  CHECK(run(sample_spec) == 0);
  const auto samples = load_binary_matrix(dir.file("samples.txt"), BinaryFormat::dense_text);
  CHECK(samples.n_cases() == 25);
  CHECK(samples.dim == 8);
}

TEST_CASE("variance-report emits one row per requested configuration") {
  TempDir dir;
  const auto data = write_dataset(dir, 120, 504);
  auto spec = parse_args({"train-nvil", "--arch", "4", "--data", data, "--max-updates", "50",
                          "--valid", "20", "--ckpt", dir.file("v.ckpt")});
  REQUIRE(run(spec) == 0);
  auto vr = parse_args({"variance-report", "--data", data, "--ckpt", dir.file("v.ckpt"),
                        "--configs", "none,scalar+idb+vn+local", "--resamples", "1000",
                        "--metrics", dir.file("v.csv"), "--seed", "5"});
  CHECK(run(vr) == 0);
  const auto csv = slurp(dir.file("v.csv"));
  CHECK(csv.rfind("config,grad_var,grad_mean_norm,signal_var\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nnone,") != std::string::npos);
  CHECK(csv.find("\nscalar+idb+vn+local,") != std::string::npos);
}

TEST_CASE("run reports failures with a nonzero status") {
  auto spec = parse_args({"train-nvil", "--arch", "4", "--data", "/nonexistent/file.txt"});
  CHECK(run(spec) != 0);

  TempDir dir;
  const auto data = write_dataset(dir, 30, 505);
  // Dataset smaller than the validation split.
  auto too_small = parse_args({"train-nvil", "--arch", "4", "--data", data, "--valid", "30"});
  CHECK(run(too_small) != 0);
}

TEST_CASE("wake-sleep checkpoints reload without baseline records") {
  TempDir dir;
  const auto data = write_dataset(dir, 120, 506);
  auto spec = parse_args({"train-ws", "--arch", "4", "--data", data, "--max-updates", "20",
                          "--valid", "20", "--ckpt", dir.file("ws.ckpt")});
  REQUIRE(run(spec) == 0);
  const auto bundle = load_checkpoint_bundle(dir.file("ws.ckpt"), VisibleKind::bernoulli);
  CHECK_FALSE(bundle.baselines.has_value());
  auto eval_spec = parse_args({"eval", "--data", data, "--ckpt", dir.file("ws.ckpt")});
  CHECK(run(eval_spec) == 0);
}
