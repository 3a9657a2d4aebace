// Apache License, Version 2.0, refer to LICENSE.txt
#include "nvil/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace nvil {

namespace {
constexpr const char* kHeader = "nvilkit-ckpt v1";
}

void checkpoint_save(const std::vector<ParamRef>& refs, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  f << kHeader << '\n';
  char buf[40];
  for (const auto& r : refs) {
    f << "param " << r.name << ' ' << r.dims.size();
    for (auto d : r.dims) f << ' ' << d;
    f << '\n';
    for (std::size_t i = 0; i < r.size; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", r.data[i]);
      if (i) f << ' ';
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

CheckpointFile CheckpointFile::read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(f, header) || header != kHeader) {
    throw std::runtime_error("checkpoint: version mismatch in '" + path + "' (expected '" +
                             kHeader + "')");
  }
  CheckpointFile file;
  std::string tag;
  while (f >> tag) {
    if (tag != "param") {
      throw std::runtime_error("checkpoint: malformed record tag '" + tag + "' in '" + path +
                               "'");
    }
    Record rec;
    std::size_t rank = 0;
    if (!(f >> rec.name >> rank)) {
      throw std::runtime_error("checkpoint: truncated record header in '" + path + "'");
    }
    rec.dims.resize(rank);
    std::size_t size = 1;
    for (auto& d : rec.dims) {
      if (!(f >> d)) {
        throw std::runtime_error("checkpoint: truncated shape for '" + rec.name + "' in '" +
                                 path + "'");
      }
      size *= d;
    }
    rec.values.resize(size);
    for (auto& v : rec.values) {
      if (!(f >> v)) {
        throw std::runtime_error("checkpoint: truncated values for '" + rec.name + "' in '" +
                                 path + "'");
      }
    }
    file.records.push_back(std::move(rec));
  }
  return file;
}

bool CheckpointFile::has(const std::string& name) const { return find(name) != nullptr; }

const CheckpointFile::Record* CheckpointFile::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

void CheckpointFile::bind(const std::vector<ParamRef>& refs) {
  for (const auto& ref : refs) {
    Record* rec = nullptr;
    for (auto& r : records) {
      if (r.name == ref.name) {
        rec = &r;
        break;
      }
    }
    if (!rec) throw std::runtime_error("checkpoint: missing record '" + ref.name + "'");
    if (rec->dims != ref.dims) {
      throw std::runtime_error("checkpoint: shape mismatch for '" + ref.name + "'");
    }
    for (std::size_t i = 0; i < ref.size; ++i) ref.data[i] = rec->values[i];
    rec->consumed = true;
  }
}

void CheckpointFile::require_fully_consumed() const {
  for (const auto& r : records) {
    if (!r.consumed) {
      throw std::runtime_error("checkpoint: unknown extra record '" + r.name + "'");
    }
  }
}

void checkpoint_load(const std::vector<ParamRef>& refs, const std::string& path) {
  CheckpointFile file = CheckpointFile::read(path);
  file.bind(refs);
  file.require_fully_consumed();
}

}  // namespace nvil
