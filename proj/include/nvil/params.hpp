// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nvil {

// Named view over one dense parameter array of a model-like object. The view
// does not own the storage; it stays valid as long as its owner does.
struct ParamRef {
  std::string name;
  std::vector<std::size_t> dims;
  double* data = nullptr;
  std::size_t size = 0;
};

// A keyed collection of dense gradient arrays, congruent in shape with the
// parameter object it was built from. Keys iterate in insertion order so all
// reductions are deterministic.
class GradientSet {
 public:
  struct Entry {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> values;
  };

  GradientSet() = default;

  static GradientSet zeros_like(const std::vector<ParamRef>& refs);

  bool has(const std::string& name) const;
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  // this += a * other (shapes must match key-for-key).
  void add_scaled(const GradientSet& other, double a);
  void scale(double a);
  double l2_norm() const;

  // Flat copy of every value, in entry order.
  std::vector<double> flatten() const;

 private:
  std::vector<Entry> entries_;
};

// params += lr * grads, gradient-ascent convention. Every gradient entry must
// match a parameter ref by name and size, and vice versa.
void sgd_step(const std::vector<ParamRef>& params, const GradientSet& grads, double lr);

}  // namespace nvil
