#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "actrans/nn/tensor.hpp"

namespace actrans::nn {

// "ACKPT1" container: magic, a key-value manifest, then named float32
// tensors. The manifest keys are ordered, so identical state serializes to
// identical bytes.
struct CheckpointManifest {
  std::map<std::string, std::string> entries;

  const std::string& at(const std::string& key) const;
  bool has(const std::string& key) const {
    return entries.count(key) != 0;
  }
  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  void set(const std::string& key, const std::string& v) { entries[key] = v; }
  void set_int(const std::string& key, long v);
  void set_double(const std::string& key, double v);
};

struct Checkpoint {
  CheckpointManifest manifest;
  std::vector<std::pair<std::string, Tensor<float>>> tensors;

  const Tensor<float>& tensor(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Serialize to an in-memory byte string (used for byte-equality checks).
std::string checkpoint_bytes(const Checkpoint& ckpt);

}  // namespace actrans::nn
