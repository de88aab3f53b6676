#pragma once

#include <Eigen/Core>

#include <map>
#include <string>
#include <vector>

#include "gr1/config.hpp"
#include "gr1/nn.hpp"

namespace gr1 {

using MatXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic,
                            Eigen::RowMajor>;

struct ArrayEntry {
  std::string name;
  bool trainable = true;
  MatXf value;
};

// Directory checkpoint: manifest.json plus one little-endian float32 blob per
// array. Every blob is content-hashed; loading verifies hashes and fails on
// any mismatch, missing blob, or format-version change.
struct CheckpointData {
  Config config;
  uint64_t seed = 0;
  std::map<std::string, std::string> inputs;  // provenance hashes
  std::vector<ArrayEntry> arrays;
  std::string content_hash;

  const ArrayEntry* find(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
};

void save_checkpoint_arrays(const std::string& dir,
                            const std::vector<ArrayEntry>& arrays,
                            const Config& cfg, uint64_t seed,
                            const std::map<std::string, std::string>& inputs);

CheckpointData load_checkpoint(const std::string& dir);

// Overall content hash as recorded in the manifest (hash over array hashes).
std::string checkpoint_content_hash(const std::string& dir);

template <class S>
void save_checkpoint(const std::string& dir, const ParamStore<S>& store,
                     const Config& cfg, uint64_t seed,
                     const std::map<std::string, std::string>& inputs = {}) {
  std::vector<ArrayEntry> arrays;
  for (size_t i = 0; i < store.size(); ++i) {
    const Param<S>& p = store[i];
    arrays.push_back(
        {p.name, p.trainable, p.value.template cast<float>()});
  }
  save_checkpoint_arrays(dir, arrays, cfg, seed, inputs);
}

// Copies checkpoint values into matching store entries. Arrays present in
// the store but absent from the checkpoint raise unless `allow_missing`;
// shape mismatches name the offending array.
template <class S>
void apply_checkpoint(const CheckpointData& ck, ParamStore<S>& store,
                      const std::string& prefix = "",
                      bool allow_missing = false) {
  for (size_t i = 0; i < store.size(); ++i) {
    Param<S>& p = store[i];
    if (!prefix.empty() && p.name.rfind(prefix, 0) != 0) continue;
    const ArrayEntry* a = ck.find(p.name);
    if (!a) {
      if (allow_missing) continue;
      throw std::runtime_error("checkpoint: missing array " + p.name);
    }
    if (a->value.rows() != p.value.rows() || a->value.cols() != p.value.cols())
      throw std::runtime_error(
          "checkpoint: shape mismatch for array " + p.name + ": stored " +
          std::to_string(a->value.rows()) + "x" +
          std::to_string(a->value.cols()) + ", expected " +
          std::to_string(p.value.rows()) + "x" +
          std::to_string(p.value.cols()));
    p.value = a->value.template cast<S>();
  }
}

}  // namespace gr1
