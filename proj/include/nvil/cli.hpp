// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvil/model.hpp"
#include "nvil/trainer.hpp"

namespace nvil {

enum class Command { train_nvil, train_ws, eval, variance_report, sample };

// Fully resolved command-line invocation.
struct RunSpec {
  Command command = Command::train_nvil;
  std::vector<std::size_t> arch_deepest_first;  // latent widths, deepest layer first
  bool autoreg_latent = false;
  bool autoreg_inference = false;
  VisibleKind visible = VisibleKind::bernoulli;
  std::string data_path;
  std::string data_format = "dense-text";  // idx | dense-text | bow
  std::string ckpt_path;
  std::string metrics_path;
  std::string out_path;
  std::size_t n_valid = 100;
  TrainConfig train;
  // sample command
  std::size_t n_samples = 100;
  std::size_t doc_length = 0;
  // variance-report command
  std::string configs = "none,scalar,scalar+idb,scalar+idb+vn";
  std::size_t resamples = 10000;

  // Latent widths ordered layer 1 (visible-adjacent) first.
  std::vector<std::size_t> widths_visible_first() const;
};

// Thrown when --help was requested; carries the help text.
struct HelpRequested {
  std::string text;
};

// A checkpoint rebuilt from its own record names and shapes: the model and
// inference network always, the baseline state when its records are present.
struct CheckpointBundle {
  ModelParams model;
  InferenceParams inference;
  std::optional<BaselineState> baselines;
};

CheckpointBundle load_checkpoint_bundle(const std::string& path, VisibleKind kind);

// Parses a full argument vector (without the program name). Throws
// std::invalid_argument on any malformed input, HelpRequested for --help.
RunSpec parse_args(const std::vector<std::string>& args);

// Executes the command; returns a process exit status (0 on success).
int run(const RunSpec& spec);

// parse_args + run with errors printed to stderr.
int main_cli(int argc, const char* const* argv);

}  // namespace nvil
