#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "iahash/bitcode.hpp"
#include "iahash/matrix.hpp"
#include "iahash/synthdata.hpp"

namespace iahash {

// Probability-weighted average of proposal hash features, organized in one
// b-sized group per category (group-major layout):
//   fused[j*b + k] = (1/N) * sum_i prob(i,j) * feat(i,k)
std::vector<double> cross_proposal_fusion(const Matrix& prop_prob, const Matrix& hash_feat);

struct FusionGrads {
  Matrix d_prob;
  Matrix d_feat;
};
FusionGrads cross_proposal_fusion_backward(const Matrix& prop_prob, const Matrix& hash_feat,
                                           std::span<const double> d_fused);

// bit = 1 iff value > 0 (zero maps to 0).
BitCode binarize(std::span<const double> x);

struct TripletResult {
  double loss = 0.0;
  std::vector<double> grad_anchor;
  std::vector<double> grad_pos;
  std::vector<double> grad_neg;
};

// Hinge loss max(0, margin - |a-n|^2 + |a-p|^2). When the hinge is inactive
// all gradients are exactly zero.
TripletResult triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                           std::span<const double> neg, double margin = 1.0);

// Triplet loss restricted to group `category` of c*b-sized fused vectors;
// the returned gradients are full-size with the other groups zero.
TripletResult category_triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                                    std::span<const double> neg, int category, int code_bits,
                                    double margin = 1.0);

// s = flatten(f) * w + bias; the fused vector is already group-major.
std::vector<double> semantic_project(std::span<const double> fused, const Matrix& w,
                                     const std::vector<double>& bias);

// Triplet loss scaled by 2^sim_pos - 2^sim_neg; requires sim_pos > sim_neg.
TripletResult weighted_triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                                    std::span<const double> neg, int sim_pos, int sim_neg,
                                    double margin = 1.0);

int shared_labels(const LabelVector& a, const LabelVector& b);

// Everything retrieval needs about one encoded image.
struct CodeBundle {
  std::int64_t id = 0;
  int categories = 0;
  int code_bits = 0;
  int semantic_bits = 0;  // 0 when the semantic head is absent
  std::vector<BitCode> category_codes;
  std::vector<double> probabilities;
  BitCode semantic_code;

  friend bool operator==(const CodeBundle&, const CodeBundle&) = default;
};

// Text format, one record per image:
//   id c b q <hex>*c <p>*c [<hex semantic>]
void write_codes(const std::filesystem::path& path, std::span<const CodeBundle> bundles);
std::vector<CodeBundle> read_codes(const std::filesystem::path& path);

}  // namespace iahash
