#include "iahash/hashcode.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "iahash/util.hpp"

namespace iahash {

std::vector<double> cross_proposal_fusion(const Matrix& prop_prob, const Matrix& hash_feat) {
  if (prop_prob.rows != hash_feat.rows)
    throw std::invalid_argument("fusion: probability matrix has " + std::to_string(prop_prob.rows) +
                                " rows, features have " + std::to_string(hash_feat.rows));
  const std::size_t n = prop_prob.rows, c = prop_prob.cols, b = hash_feat.cols;
  std::vector<double> fused(c * b, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* prow = prop_prob.row(i);
    const double* hrow = hash_feat.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      const double pj = prow[j];
      double* group = fused.data() + j * b;
      for (std::size_t k = 0; k < b; ++k) group[k] += pj * hrow[k];
    }
  }
  const double inv_n = 1.0 / double(n);
  for (double& v : fused) v *= inv_n;
  return fused;
}

FusionGrads cross_proposal_fusion_backward(const Matrix& prop_prob, const Matrix& hash_feat,
                                           std::span<const double> d_fused) {
  const std::size_t n = prop_prob.rows, c = prop_prob.cols, b = hash_feat.cols;
  if (prop_prob.rows != hash_feat.rows)
    throw std::invalid_argument("fusion backward: row mismatch");
  if (d_fused.size() != c * b)
    throw std::invalid_argument("fusion backward: gradient length " + std::to_string(d_fused.size()) +
                                " != " + std::to_string(c * b));
  FusionGrads g;
  g.d_prob = Matrix(n, c);
  g.d_feat = Matrix(n, b);
  const double inv_n = 1.0 / double(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* prow = prop_prob.row(i);
    const double* hrow = hash_feat.row(i);
    double* dp = g.d_prob.row(i);
    double* dh = g.d_feat.row(i);
    for (std::size_t j = 0; j < c; ++j) {
      const double* dgroup = d_fused.data() + j * b;
      double acc = 0.0;
      for (std::size_t k = 0; k < b; ++k) {
        acc += dgroup[k] * hrow[k];
        dh[k] += dgroup[k] * prow[j];
      }
      dp[j] = acc * inv_n;
    }
    for (std::size_t k = 0; k < b; ++k) dh[k] *= inv_n;
  }
  return g;
}

BitCode binarize(std::span<const double> x) {
  BitCode code(int(x.size()));
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] > 0.0) code.set(int(k), true);
  return code;
}

TripletResult triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                           std::span<const double> neg, double margin) {
  if (anchor.size() != pos.size() || anchor.size() != neg.size())
    throw std::invalid_argument("triplet_loss: vector lengths differ");
  const std::size_t n = anchor.size();
  double dist_pos = 0.0, dist_neg = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dp = anchor[k] - pos[k];
    const double dn = anchor[k] - neg[k];
    dist_pos += dp * dp;
    dist_neg += dn * dn;
  }
  TripletResult out;
  out.grad_anchor.assign(n, 0.0);
  out.grad_pos.assign(n, 0.0);
  out.grad_neg.assign(n, 0.0);
  const double slack = margin - dist_neg + dist_pos;
  if (slack > 0.0) {
    out.loss = slack;
    for (std::size_t k = 0; k < n; ++k) {
      out.grad_anchor[k] = 2.0 * (neg[k] - pos[k]);
      out.grad_pos[k] = 2.0 * (pos[k] - anchor[k]);
      out.grad_neg[k] = 2.0 * (anchor[k] - neg[k]);
    }
  }
  return out;
}

TripletResult category_triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                                    std::span<const double> neg, int category, int code_bits,
                                    double margin) {
  if (anchor.size() != pos.size() || anchor.size() != neg.size())
    throw std::invalid_argument("category_triplet_loss: vector lengths differ");
  const std::size_t offset = std::size_t(category) * code_bits;
  if (offset + code_bits > anchor.size())
    throw std::invalid_argument("category_triplet_loss: group " + std::to_string(category) +
                                " out of range for " + std::to_string(anchor.size()) + " values");
  TripletResult group = triplet_loss(anchor.subspan(offset, code_bits),
                                     pos.subspan(offset, code_bits),
                                     neg.subspan(offset, code_bits), margin);
  TripletResult out;
  out.loss = group.loss;
  out.grad_anchor.assign(anchor.size(), 0.0);
  out.grad_pos.assign(anchor.size(), 0.0);
  out.grad_neg.assign(anchor.size(), 0.0);
  for (int k = 0; k < code_bits; ++k) {
    out.grad_anchor[offset + k] = group.grad_anchor[std::size_t(k)];
    out.grad_pos[offset + k] = group.grad_pos[std::size_t(k)];
    out.grad_neg[offset + k] = group.grad_neg[std::size_t(k)];
  }
  return out;
}

std::vector<double> semantic_project(std::span<const double> fused, const Matrix& w,
                                     const std::vector<double>& bias) {
  if (fused.size() != w.rows)
    throw std::invalid_argument("semantic_project: fused length " + std::to_string(fused.size()) +
                                " != weight rows " + std::to_string(w.rows));
  if (bias.size() != w.cols)
    throw std::invalid_argument("semantic_project: bias length mismatch");
  std::vector<double> s(bias);
  for (std::size_t r = 0; r < w.rows; ++r) {
    const double f = fused[r];
    const double* wrow = w.row(r);
    for (std::size_t q = 0; q < w.cols; ++q) s[q] += f * wrow[q];
  }
  return s;
}

TripletResult weighted_triplet_loss(std::span<const double> anchor, std::span<const double> pos,
                                    std::span<const double> neg, int sim_pos, int sim_neg,
                                    double margin) {
  if (sim_pos <= sim_neg)
    throw std::invalid_argument("weighted_triplet_loss: requires sim_pos > sim_neg, got " +
                                std::to_string(sim_pos) + " <= " + std::to_string(sim_neg));
  TripletResult out = triplet_loss(anchor, pos, neg, margin);
  const double weight = std::ldexp(1.0, sim_pos) - std::ldexp(1.0, sim_neg);
  out.loss *= weight;
  for (std::size_t k = 0; k < anchor.size(); ++k) {
    out.grad_anchor[k] *= weight;
    out.grad_pos[k] *= weight;
    out.grad_neg[k] *= weight;
  }
  return out;
}

int shared_labels(const LabelVector& a, const LabelVector& b) {
  if (a.y.size() != b.y.size())
    throw std::invalid_argument("shared_labels: label lengths differ: " +
                                std::to_string(a.y.size()) + " vs " + std::to_string(b.y.size()));
  int n = 0;
  for (std::size_t j = 0; j < a.y.size(); ++j) n += int(a.y[j]) & int(b.y[j]);
  return n;
}

void write_codes(const std::filesystem::path& path, std::span<const CodeBundle> bundles) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open codes file for writing: " + path.string());
  for (const auto& bundle : bundles) {
    os << bundle.id << ' ' << bundle.categories << ' ' << bundle.code_bits << ' '
       << bundle.semantic_bits;
    for (const auto& code : bundle.category_codes) os << ' ' << code.to_hex();
    for (double p : bundle.probabilities) os << ' ' << format_double(p);
    if (bundle.semantic_bits > 0) os << ' ' << bundle.semantic_code.to_hex();
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing codes file: " + path.string());
}

std::vector<CodeBundle> read_codes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("missing codes file: " + path.string());
  std::vector<CodeBundle> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CodeBundle b;
    if (!(ls >> b.id >> b.categories >> b.code_bits >> b.semantic_bits) || b.categories < 1 ||
        b.code_bits < 1 || b.semantic_bits < 0)
      throw std::runtime_error("codes record " + std::to_string(index) + ": bad header fields");
    std::string hex;
    for (int j = 0; j < b.categories; ++j) {
      if (!(ls >> hex)) throw std::runtime_error("codes record " + std::to_string(index) +
                                                 ": truncated category codes");
      b.category_codes.push_back(BitCode::from_hex(hex, b.code_bits));
    }
    b.probabilities.resize(std::size_t(b.categories));
    for (int j = 0; j < b.categories; ++j)
      if (!(ls >> b.probabilities[std::size_t(j)]))
        throw std::runtime_error("codes record " + std::to_string(index) +
                                 ": truncated probabilities");
    if (b.semantic_bits > 0) {
      if (!(ls >> hex))
        throw std::runtime_error("codes record " + std::to_string(index) + ": missing semantic code");
      b.semantic_code = BitCode::from_hex(hex, b.semantic_bits);
    }
    std::string extra;
    if (ls >> extra)
      throw std::runtime_error("codes record " + std::to_string(index) + ": trailing data");
    out.push_back(std::move(b));
    ++index;
  }
  return out;
}

}  // namespace iahash
