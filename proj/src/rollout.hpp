#pragma once

#include <string>
#include <vector>

#include "model.hpp"
#include "tensor.hpp"

namespace gridvit {

// Class-token attribution over patches, derived from a recorded
// AttentionStack: head-averaged, residual-adjusted attention multiplied
// across layers.
struct RolloutMap {
  Tensor64 matrix;  // (N+1) x (N+1), row-stochastic
  Tensor class_map; // N raw per-patch weights (row 0, columns 1..N)
  Tensor overlay;   // grid_h x grid_w, class_map painted over P x P blocks
};

// Arithmetic mean over the head axis per layer; rows stay stochastic.
std::vector<Tensor64> average_heads(const AttentionStack& stack);

// Per layer A_bar = normalize_rows(0.5*A + 0.5*I) to account for the
// residual path, then the product A_bar_L * ... * A_bar_1. Rows whose sum
// strays from 1 by more than 1e-4 are rejected.
Tensor64 rollout(const std::vector<Tensor64>& averaged);

// Splits the rollout's class-token row into per-patch weights and paints
// them over the grid geometry.
RolloutMap class_attention_map(const Tensor64& rollout_matrix,
                               const ModelConfig& config);

// Writes <prefix>.pgm (binary P5, min-max scaled to 0..255) and
// <prefix>.csv ("patch_row,patch_col,value", raw values, 9 significant
// digits — parses back to class_map bit-exactly).
void export_heatmap(const RolloutMap& map, const ModelConfig& config,
                    const std::string& prefix);

// Reads the CSV written by export_heatmap back into a class_map vector.
Tensor load_heatmap_csv(const std::string& path);

}  // namespace gridvit
