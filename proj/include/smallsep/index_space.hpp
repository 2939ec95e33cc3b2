#pragma once

#include <complex>
#include <memory>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "smallsep/model.hpp"

namespace smallsep {

using cplx = std::complex<double>;

// |k| = max(|l|_inf, |j|_inf)
int site_abs(const Site& k);

// 1 when only the component differs, otherwise |i - i'| in the ambient lattice.
int dist(const Site& k, const Site& kp);

// Sup-distance between the (l, j) parts only.
int index_dist(const IntVec& l1, const IntVec& j1, const IntVec& l2, const IntVec& j2);

// A run of sites sharing (l, j); the block of all its components.
struct Group {
  IntVec l;
  IntVec j;
  int first_site = 0;
  int nsites = 0;
  int offset = 0;  // scalar offset
  int size = 0;    // scalar size
};

// Sorted list of sites with scalar offsets. Sites with equal (l, j) are
// contiguous, so each (l, j) forms one group.
class Layout {
 public:
  static std::shared_ptr<const Layout> from_sites(ModelPtr model, std::vector<Site> sites);
  // { k : dist(center, k) <= N } with the given component set.
  static std::shared_ptr<const Layout> window(ModelPtr model, const IntVec& l_center, const IntVec& j_center,
                                              int N, const std::vector<int>& comps);
  // Galerkin space { |k| <= N }.
  static std::shared_ptr<const Layout> ball(ModelPtr model, int N, const std::vector<int>& comps);

  const SpectralModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  const std::vector<Site>& sites() const { return sites_; }
  const std::vector<Group>& groups() const { return groups_; }
  int num_sites() const { return static_cast<int>(sites_.size()); }
  int dim() const { return dim_; }
  int offset(int s) const { return offset_[s]; }
  int block_size(int s) const { return size_[s]; }
  int group_of(int s) const { return group_of_[s]; }
  int find(const Site& k) const;
  bool same_as(const Layout& other) const;
  // Bounding box of the combined (l, j) coordinates.
  IntVec box_lo() const { return lo_; }
  IntVec box_hi() const { return hi_; }
  int max_components() const { return max_comps_; }

 private:
  ModelPtr model_;
  std::vector<Site> sites_;
  std::vector<int> offset_, size_, group_of_;
  std::vector<Group> groups_;
  std::unordered_map<std::size_t, std::vector<int>> lookup_;
  int dim_ = 0;
  int max_comps_ = 0;
  IntVec lo_, hi_;
};

using LayoutPtr = std::shared_ptr<const Layout>;

bool same_layout(const LayoutPtr& a, const LayoutPtr& b);

// Finitely supported element of H^s stored on a layout.
class SeqVec {
 public:
  SeqVec() = default;
  explicit SeqVec(LayoutPtr layout);
  SeqVec(LayoutPtr layout, Eigen::VectorXcd data);

  const LayoutPtr& layout() const { return layout_; }
  const Eigen::VectorXcd& data() const { return data_; }
  Eigen::VectorXcd& data() { return data_; }
  auto block(int s) { return data_.segment(layout_->offset(s), layout_->block_size(s)); }
  auto block(int s) const { return data_.segment(layout_->offset(s), layout_->block_size(s)); }
  // Block at a site, zero-length if absent.
  Eigen::VectorXcd at(const Site& k) const;
  void set(const Site& k, const Eigen::VectorXcd& value);

  SeqVec operator+(const SeqVec& o) const;
  SeqVec operator-(const SeqVec& o) const;
  SeqVec operator*(cplx c) const;

 private:
  LayoutPtr layout_;
  Eigen::VectorXcd data_;
};

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double sobolev_norm(const SeqVec& u, double s);

// Pi^(N): zero every block with |k| > N, keeping the layout.
SeqVec project(const SeqVec& u, int N);

// Copy the overlapping blocks of u onto another layout; missing blocks are zero.
SeqVec transfer(const SeqVec& u, const LayoutPtr& target);

// ||u||_{t s1 + (1-t) s2} <= ||u||_{s1}^t ||u||_{s2}^{1-t}
bool interpolation_check(const SeqVec& u, double s1, double s2, double t, double rel_tol = 1e-12);

// (P1) ||Pi u||_{s+nu} <= C N^nu ||u||_s and (P2) ||(1-Pi) u||_s <= N^-nu ||u||_{s+nu};
// returns the ratio lhs / (N^nu rhs-norm) so callers can compare to a constant.
double smoothing_ratio_p1(const SeqVec& u, int N, double s, double nu);
double smoothing_ratio_p2(const SeqVec& u, int N, double s, double nu);

}  // namespace smallsep
