#pragma once

// Masking plan shared between the pretrainer (which draws it) and the graph
// encoder (which substitutes the learnable mask token at encode time).

#include <unordered_map>
#include <vector>

#include "relgp/common.hpp"

namespace relgp {

enum class MaskMode { EntityLevel, CellLevel };

const char* mask_mode_name(MaskMode mode);
MaskMode parse_mask_mode(const std::string& s);

struct MaskPlan {
  MaskMode mode = MaskMode::EntityLevel;
  double p_mask = 0.5;
  uint64_t rng_seed = 0;
  std::vector<NodeId> masked;  // ascending node id
  // Cell mode only: masked column ordinals per masked node (ascending).
  std::unordered_map<NodeId, std::vector<int>> masked_cols;
  // Column permutation applied to the reconstruction template per masked node.
  std::unordered_map<NodeId, std::vector<int>> perm;

  bool is_masked(NodeId v) const {
    return std::binary_search(masked.begin(), masked.end(), v);
  }
  const std::vector<int>* cols_of(NodeId v) const {
    auto it = masked_cols.find(v);
    return it == masked_cols.end() ? nullptr : &it->second;
  }
};

}  // namespace relgp
