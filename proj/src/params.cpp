// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/params.hpp"

#include <cmath>
#include <stdexcept>

namespace nvil {

GradientSet GradientSet::zeros_like(const std::vector<ParamRef>& refs) {
  GradientSet g;
  g.entries_.reserve(refs.size());
  for (const auto& r : refs) {
    g.entries_.push_back(Entry{r.name, r.dims, std::vector<double>(r.size, 0.0)});
  }
  return g;
}

bool GradientSet::has(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

GradientSet::Entry& GradientSet::at(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("params: no gradient entry named '" + name + "'");
}

const GradientSet::Entry& GradientSet::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e;
  }
  throw std::invalid_argument("params: no gradient entry named '" + name + "'");
}

void GradientSet::add_scaled(const GradientSet& other, double a) {
  if (other.entries_.size() != entries_.size()) {
    throw std::invalid_argument("params: gradient set key mismatch in add_scaled");
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    auto& e = entries_[k];
    const auto& o = other.entries_[k];
    if (e.name != o.name || e.values.size() != o.values.size()) {
      throw std::invalid_argument("params: gradient set key mismatch in add_scaled");
    }
    for (std::size_t i = 0; i < e.values.size(); ++i) e.values[i] += a * o.values[i];
  }
}

void GradientSet::scale(double a) {
  for (auto& e : entries_) {
    for (double& v : e.values) v *= a;
  }
}

double GradientSet::l2_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) {
    for (double v : e.values) s += v * v;
  }
  return std::sqrt(s);
}

std::vector<double> GradientSet::flatten() const {
  std::vector<double> out;
  for (const auto& e : entries_) out.insert(out.end(), e.values.begin(), e.values.end());
  return out;
}

void sgd_step(const std::vector<ParamRef>& params, const GradientSet& grads, double lr) {
  if (params.size() != grads.entries().size()) {
    throw std::invalid_argument("params: sgd_step parameter/gradient key count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    const auto& g = grads.entries()[k];
    if (p.name != g.name || p.size != g.values.size()) {
      throw std::invalid_argument("params: sgd_step shape mismatch at '" + p.name + "'");
    }
    for (std::size_t i = 0; i < p.size; ++i) p.data[i] += lr * g.values[i];
  }
}

}  // namespace nvil
