#pragma once

#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "smallsep/index_space.hpp"

namespace smallsep {

// Sum over i in Z^n of <i>^{-p}: exact up to |i| <= R plus an integral tail.
double lattice_weight_sum(int n, double p, int R = 50);

// Constants of the s-decay norm for a fixed (d, r, s0).
struct DecayContext {
  int d = 1;
  int r = 1;
  double s0 = 2.0;
  double S = 0.0;   // upper bound of sum <i>^{-2 s0}
  double K1 = 0.0;
  double K2 = 0.0;  // sqrt(sum <i>^{-2(d+r)})

  static DecayContext make(int d, int r, double s0);
  static DecayContext with_K1(int d, int r, double s0, double K1);

  int n() const { return d + r; }
  double K1_lower_bound() const { return 4.0 * S; }
  // |M1 M2|_s <= C(s)/2 (|M1|_{s0}|M2|_s + |M1|_s|M2|_{s0}); C(s0) <= 1 with the default K1.
  double interp_constant(double s) const;
  // ||M||_0 <= schur_factor() |M|_{s0}
  double schur_factor() const;
};

struct BlockMatrix {
  LayoutPtr rows;
  LayoutPtr cols;
  Eigen::MatrixXcd m;

  BlockMatrix() = default;
  BlockMatrix(LayoutPtr r, LayoutPtr c);
  BlockMatrix(LayoutPtr r, LayoutPtr c, Eigen::MatrixXcd data);
  static BlockMatrix identity(const LayoutPtr& layout);

  // Grouped block M_{{h}}^{{h'}} over all components of the two groups.
  auto group_block(int gr, int gc) const {
    const Group& a = rows->groups()[gr];
    const Group& b = cols->groups()[gc];
    return m.block(a.offset, b.offset, a.size, b.size);
  }
  auto site_block(int sr, int sc) const {
    return m.block(rows->offset(sr), cols->offset(sc), rows->block_size(sr), cols->block_size(sc));
  }
};

// Largest singular value of a small block.
double block_op_norm(const Eigen::Ref<const Eigen::MatrixXcd>& b);

// [M(i)] on a box of combined (l, j) differences.
class DecayProfile {
 public:
  DecayProfile() = default;
  DecayProfile(const IntVec& lo, const IntVec& hi);

  int dims() const { return lo_.n; }
  const IntVec& lo() const { return lo_; }
  const IntVec& hi() const { return hi_; }
  bool contains(const IntVec& i) const;
  double at(const IntVec& i) const;
  void raise(const IntVec& i, double v);
  void for_each(const std::function<void(const IntVec&, double)>& fn) const;
  std::size_t index(const IntVec& i) const;
  double& raw(std::size_t idx) { return val_[idx]; }
  IntVec diff_of(std::size_t idx) const;
  std::size_t size() const { return val_.size(); }

 private:
  IntVec lo_, hi_;
  std::vector<std::size_t> stride_;
  std::vector<double> val_;
};

DecayProfile decay_profile(const BlockMatrix& M);
// <i> = max(1, |i|)
double bracket(const IntVec& i);
double s_norm(const DecayProfile& prof, double s, const DecayContext& ctx);
double s_norm(const BlockMatrix& M, double s, const DecayContext& ctx);
// sum_i [M(i)], a bound for ||M||_0 by the block Schur test.
double schur_bound(const DecayProfile& prof);

BlockMatrix toeplitz_majorant(const BlockMatrix& M);
BlockMatrix multiply(const BlockMatrix& A, const BlockMatrix& B);
BlockMatrix add(const BlockMatrix& A, const BlockMatrix& B, cplx scale_b = 1.0);
SeqVec apply(const BlockMatrix& M, const SeqVec& h);

// Restriction to sub-layouts whose sites all belong to the parent layouts.
BlockMatrix submatrix(const BlockMatrix& M, const LayoutPtr& rows, const LayoutPtr& cols);
std::vector<int> scalar_indices(const Layout& parent, const Layout& sub);

// near: group distance <= N; far: > N.
std::pair<BlockMatrix, BlockMatrix> smoothing_split(const BlockMatrix& M, int N);

double op_norm(const Eigen::MatrixXcd& A);
double op_norm(const BlockMatrix& M);
double smallest_singular_value(const Eigen::MatrixXcd& A);

// Tame constant for ||Mh||_s <= C (|M|_{s0}||h||_s + |M|_s||h||_{s0}).
double apply_constant(double s, const DecayContext& ctx, const SpectralModel& model);

// |M|_s <= sqrt(K1) (2N+1)^{(d+r)/2} N^s ||M||_0 for M supported on group distance <= N.
double near_part_bound(int N, double s, double opnorm, const DecayContext& ctx);
// The form N^{s+d+r} ||M||_0, reported for comparison only.
double near_part_bound_unscaled(int N, double s, double opnorm, const DecayContext& ctx);

// Right-hand side |c| K2 max_k |M_k|_{s+d+r} over single-site rows M_k.
double decay_along_lines_bound(const BlockMatrix& M, double s, const DecayContext& ctx);

struct NeumannOptions {
  double tol = 1e-14;       // relative to |Minv|_{s0}
  int max_terms = 200;
  double max_factor = 0.9;  // measured term ratio
  bool check_precondition = true;
};

struct NeumannInfo {
  int terms = 0;
  double precondition = 0.0;  // |Minv|_{s0} |P|_{s0}
  double max_ratio = 0.0;
};

// sum_n (-Minv P)^n Minv, a left inverse of M + P when Minv is one of M.
BlockMatrix perturbed_left_inverse(const BlockMatrix& Minv, const BlockMatrix& P, const DecayContext& ctx,
                                   const NeumannOptions& opts = {}, NeumannInfo* info = nullptr);

}  // namespace smallsep
