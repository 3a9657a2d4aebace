// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <string>
#include <vector>

#include "nvil/params.hpp"

namespace nvil {

// Versioned flat-text checkpoint: a `nvilkit-ckpt v1` header, then one record
// per parameter array (name, shape, row-major values at 17 significant
// digits). The decimal width makes save/load round trips bit-exact.
void checkpoint_save(const std::vector<ParamRef>& refs, const std::string& path);

struct CheckpointFile {
  struct Record {
    std::string name;
    std::vector<std::size_t> dims;
    std::vector<double> values;
    bool consumed = false;
  };
  std::vector<Record> records;

  static CheckpointFile read(const std::string& path);
  bool has(const std::string& name) const;
  const Record* find(const std::string& name) const;

  // Copies matching records into the refs, marking them consumed. Missing
  // records and shape mismatches are errors.
  void bind(const std::vector<ParamRef>& refs);

  // Errors if any record was never consumed by a bind().
  void require_fully_consumed() const;
};

// read + bind + require_fully_consumed: the record set must exactly match.
void checkpoint_load(const std::vector<ParamRef>& refs, const std::string& path);

}  // namespace nvil
