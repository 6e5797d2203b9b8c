#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "vrprl/nn/tensor.hpp"

namespace vrprl::nn {

inline constexpr int kCheckpointFormatVersion = 1;

// A checkpoint is a directory holding `manifest.txt` and one blob of
// little-endian f64 values. Tensors are grouped (e.g. "actor", "critic",
// "opt.actor.m") so trainer state can travel with the weights. `meta` holds
// free-form key/value text such as the architecture and hyperparameters.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, ParamStore> groups;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Writes the blob under a content-addressed name, then swaps the manifest in
// with a rename, so a reader sees either the old or the new checkpoint.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);

// Throws LoadError on a missing or malformed manifest, a version mismatch,
// or a blob whose size or checksum disagrees with the manifest.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

// Every key in `expected` must be present in `ckpt.meta` with the same value.
void require_meta(const Checkpoint& ckpt, const std::map<std::string, std::string>& expected);

// Copies the tensors of group `group` into `target`, which must already hold
// exactly the same names and shapes.
void load_group_into(const Checkpoint& ckpt, const std::string& group, ParamStore& target);

}  // namespace vrprl::nn
