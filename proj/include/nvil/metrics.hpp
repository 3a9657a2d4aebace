// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nvil {

// One evaluation row of the training log.
struct MetricsRow {
  std::size_t update = 0;
  double train_bound = 0.0;
  double valid_bound = 0.0;
  double signal_mean = 0.0;
  double signal_var = 0.0;
  double grad_norm_theta = 0.0;
  double grad_norm_phi = 0.0;
};

// Decimal with 9 significant digits, the format used by all CSV output.
std::string format_g9(double v);

std::string metrics_csv_string(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

}  // namespace nvil
