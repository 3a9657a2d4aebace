// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/metrics.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nvil {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string metrics_csv_string(const std::vector<MetricsRow>& rows) {
  std::string out =
      "update,train_bound,valid_bound,signal_mean,signal_var,grad_norm_theta,grad_norm_phi\n";
  for (const auto& r : rows) {
    out += std::to_string(r.update);
    out += ',';
    out += format_g9(r.train_bound);
    out += ',';
    out += format_g9(r.valid_bound);
    out += ',';
    out += format_g9(r.signal_mean);
    out += ',';
    out += format_g9(r.signal_var);
    out += ',';
    out += format_g9(r.grad_norm_theta);
    out += ',';
    out += format_g9(r.grad_norm_phi);
    out += '\n';
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("metrics: cannot open '" + path + "' for writing");
  f << metrics_csv_string(rows);
  if (!f) throw std::runtime_error("metrics: write failed for '" + path + "'");
}

}  // namespace nvil
