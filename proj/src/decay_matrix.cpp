#include "smallsep/decay_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace smallsep {

double lattice_weight_sum(int n, double p, int R) {
  if (p <= n) throw std::invalid_argument("lattice_weight_sum: divergent sum (p <= n)");
  CompensatedSum acc;
  acc.add(1.0);  // i = 0
  for (int k = 1; k <= R; ++k) {
    const double count = std::pow(2.0 * k + 1.0, n) - std::pow(2.0 * k - 1.0, n);
    acc.add(count * std::pow(static_cast<double>(k), -p));
  }
  // (2k+1)^n - (2k-1)^n <= 2n 3^{n-1} k^{n-1} for k >= 1
  const double tail = 2.0 * n * std::pow(3.0, n - 1) * std::pow(static_cast<double>(R), n - p) / (p - n);
  acc.add(tail);
  return acc.value();
}

DecayContext DecayContext::make(int d, int r, double s0) {
  DecayContext c;
  c.d = d;
  c.r = r;
  c.s0 = s0;
  if (!(s0 > 0.5 * (d + r))) throw std::invalid_argument("DecayContext: need s0 > (d+r)/2");
  c.S = lattice_weight_sum(d + r, 2.0 * s0);
  c.K1 = std::pow(4.0, std::max(1.0, s0)) * c.S + 1.0;
  c.K2 = std::sqrt(lattice_weight_sum(d + r, 2.0 * (d + r)));
  return c;
}

DecayContext DecayContext::with_K1(int d, int r, double s0, double K1) {
  DecayContext c = make(d, r, s0);
  c.K1 = K1;
  return c;
}

double DecayContext::interp_constant(double s) const {
  const double f = s >= 1.0 ? std::pow(2.0, s - 1.0) : 1.0;
  return 2.0 * f * std::sqrt(S / K1);
}

double DecayContext::schur_factor() const { return std::sqrt(S / K1); }

BlockMatrix::BlockMatrix(LayoutPtr r, LayoutPtr c)
    : rows(std::move(r)), cols(std::move(c)), m(Eigen::MatrixXcd::Zero(rows->dim(), cols->dim())) {}

BlockMatrix::BlockMatrix(LayoutPtr r, LayoutPtr c, Eigen::MatrixXcd data)
    : rows(std::move(r)), cols(std::move(c)), m(std::move(data)) {
  if (m.rows() != rows->dim() || m.cols() != cols->dim())
    throw std::invalid_argument("BlockMatrix: data shape does not match layouts");
}

BlockMatrix BlockMatrix::identity(const LayoutPtr& layout) {
  return BlockMatrix(layout, layout, Eigen::MatrixXcd::Identity(layout->dim(), layout->dim()));
}

double block_op_norm(const Eigen::Ref<const Eigen::MatrixXcd>& b) {
  const auto nr = b.rows(), nc = b.cols();
  if (nr == 0 || nc == 0) return 0.0;
  if (nr == 1 && nc == 1) return std::abs(b(0, 0));
  if (nr == 1 || nc == 1) return b.norm();
  if (nr <= 64 && nc <= 64) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(b);
    return svd.singularValues()(0);
  }
  // power iteration on b^* b
  Eigen::VectorXcd x = Eigen::VectorXcd::Ones(nc) / std::sqrt(static_cast<double>(nc));
  double sigma = 0.0;
  for (int it = 0; it < 500; ++it) {
    Eigen::VectorXcd y = b.adjoint() * (b * x);
    const double ny = y.norm();
    if (ny == 0.0) return 0.0;
    const double next = std::sqrt(ny);
    x = y / ny;
    if (std::abs(next - sigma) <= 1e-15 * next) {
      sigma = next;
      break;
    }
    sigma = next;
  }
  return sigma;
}

DecayProfile::DecayProfile(const IntVec& lo, const IntVec& hi) : lo_(lo), hi_(hi) {
  if (lo.n != hi.n) throw std::invalid_argument("DecayProfile: box dimension mismatch");
  stride_.assign(lo.n, 1);
  std::size_t total = 1;
  for (int p = lo.n - 1; p >= 0; --p) {
    stride_[p] = total;
    total *= static_cast<std::size_t>(std::max(0, hi.v[p] - lo.v[p] + 1));
  }
  val_.assign(total, 0.0);
}

bool DecayProfile::contains(const IntVec& i) const {
  if (i.n != lo_.n) return false;
  for (int p = 0; p < i.n; ++p)
    if (i.v[p] < lo_.v[p] || i.v[p] > hi_.v[p]) return false;
  return true;
}

std::size_t DecayProfile::index(const IntVec& i) const {
  std::size_t idx = 0;
  for (int p = 0; p < i.n; ++p) idx += static_cast<std::size_t>(i.v[p] - lo_.v[p]) * stride_[p];
  return idx;
}

IntVec DecayProfile::diff_of(std::size_t idx) const {
  IntVec out(lo_.n);
  for (int p = 0; p < lo_.n; ++p) {
    out.v[p] = lo_.v[p] + static_cast<int>(idx / stride_[p]);
    idx %= stride_[p];
  }
  return out;
}

double DecayProfile::at(const IntVec& i) const { return contains(i) ? val_[index(i)] : 0.0; }

void DecayProfile::raise(const IntVec& i, double v) {
  if (!contains(i)) throw std::out_of_range("DecayProfile: difference outside box " + to_string(i));
  double& slot = val_[index(i)];
  slot = std::max(slot, v);
}

void DecayProfile::for_each(const std::function<void(const IntVec&, double)>& fn) const {
  for (std::size_t idx = 0; idx < val_.size(); ++idx)
    if (val_[idx] != 0.0) fn(diff_of(idx), val_[idx]);
}

DecayProfile decay_profile(const BlockMatrix& M) {
  const Layout& R = *M.rows;
  const Layout& C = *M.cols;
  const int nd = R.model().d + R.model().r;
  IntVec lo(nd), hi(nd);
  if (R.num_sites() > 0 && C.num_sites() > 0) {
    lo = R.box_lo() - C.box_hi();
    hi = R.box_hi() - C.box_lo();
  }
  DecayProfile prof(lo, hi);
  if (R.num_sites() == 0 || C.num_sites() == 0) return prof;
  const auto& gr = R.groups();
  const auto& gc = C.groups();
  std::vector<IntVec> rc(gr.size()), cc(gc.size());
  for (std::size_t a = 0; a < gr.size(); ++a) rc[a] = concat(gr[a].l, gr[a].j);
  for (std::size_t b = 0; b < gc.size(); ++b) cc[b] = concat(gc[b].l, gc[b].j);
  for (std::size_t a = 0; a < gr.size(); ++a) {
    for (std::size_t b = 0; b < gc.size(); ++b) {
      double v;
      if (gr[a].size == 1 && gc[b].size == 1)
        v = std::abs(M.m(gr[a].offset, gc[b].offset));
      else
        v = block_op_norm(M.group_block(static_cast<int>(a), static_cast<int>(b)));
      if (v == 0.0) continue;
      double& slot = prof.raw(prof.index(rc[a] - cc[b]));
      if (v > slot) slot = v;
    }
  }
  return prof;
}

double bracket(const IntVec& i) { return std::max(1, sup_norm(i)); }

double s_norm(const DecayProfile& prof, double s, const DecayContext& ctx) {
  if (s < 0) throw std::invalid_argument("s_norm: s < 0");
  CompensatedSum acc;
  prof.for_each([&](const IntVec& i, double v) { acc.add(v * v * std::pow(bracket(i), 2.0 * s)); });
  return std::sqrt(ctx.K1 * std::max(0.0, acc.value()));
}

double s_norm(const BlockMatrix& M, double s, const DecayContext& ctx) { return s_norm(decay_profile(M), s, ctx); }

double schur_bound(const DecayProfile& prof) {
  CompensatedSum acc;
  prof.for_each([&](const IntVec&, double v) { acc.add(v); });
  return acc.value();
}

BlockMatrix toeplitz_majorant(const BlockMatrix& M) {
  const DecayProfile prof = decay_profile(M);
  BlockMatrix out(M.rows, M.cols);
  const auto& gr = M.rows->groups();
  const auto& gc = M.cols->groups();
  for (std::size_t a = 0; a < gr.size(); ++a) {
    const IntVec ra = concat(gr[a].l, gr[a].j);
    for (std::size_t b = 0; b < gc.size(); ++b) {
      const double v = prof.at(ra - concat(gc[b].l, gc[b].j));
      if (v == 0.0) continue;
      const int k = std::min(gr[a].size, gc[b].size);
      for (int q = 0; q < k; ++q) out.m(gr[a].offset + q, gc[b].offset + q) = v;
    }
  }
  return out;
}

BlockMatrix multiply(const BlockMatrix& A, const BlockMatrix& B) {
  if (!same_layout(A.cols, B.rows)) throw std::invalid_argument("multiply: window mismatch");
  return BlockMatrix(A.rows, B.cols, A.m * B.m);
}

BlockMatrix add(const BlockMatrix& A, const BlockMatrix& B, cplx scale_b) {
  if (!same_layout(A.rows, B.rows) || !same_layout(A.cols, B.cols)) throw std::invalid_argument("add: window mismatch");
  return BlockMatrix(A.rows, A.cols, A.m + scale_b * B.m);
}

SeqVec apply(const BlockMatrix& M, const SeqVec& h) {
  if (!same_layout(M.cols, h.layout())) throw std::invalid_argument("apply: support mismatch");
  return SeqVec(M.rows, M.m * h.data());
}

std::vector<int> scalar_indices(const Layout& parent, const Layout& sub) {
  std::vector<int> idx;
  idx.reserve(sub.dim());
  for (const Site& k : sub.sites()) {
    const int s = parent.find(k);
    if (s < 0) throw std::out_of_range("submatrix: site not in parent window " + to_string(k));
    for (int q = 0; q < parent.block_size(s); ++q) idx.push_back(parent.offset(s) + q);
  }
  return idx;
}

BlockMatrix submatrix(const BlockMatrix& M, const LayoutPtr& rows, const LayoutPtr& cols) {
  const auto ri = scalar_indices(*M.rows, *rows);
  const auto ci = scalar_indices(*M.cols, *cols);
  return BlockMatrix(rows, cols, M.m(ri, ci));
}

std::pair<BlockMatrix, BlockMatrix> smoothing_split(const BlockMatrix& M, int N) {
  if (N < 2) throw std::invalid_argument("smoothing_split: need N >= 2");
  BlockMatrix near = M;
  BlockMatrix far(M.rows, M.cols);
  const auto& gr = M.rows->groups();
  const auto& gc = M.cols->groups();
  for (const auto& a : gr) {
    for (const auto& b : gc) {
      if (index_dist(a.l, a.j, b.l, b.j) > N) {
        far.m.block(a.offset, b.offset, a.size, b.size) = M.m.block(a.offset, b.offset, a.size, b.size);
        near.m.block(a.offset, b.offset, a.size, b.size).setZero();
      }
    }
  }
  return {near, far};
}

double op_norm(const Eigen::MatrixXcd& A) {
  if (A.size() == 0) return 0.0;
  if (std::min(A.rows(), A.cols()) <= 64) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(A);
    return svd.singularValues()(0);
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
  return svd.singularValues()(0);
}

double op_norm(const BlockMatrix& M) { return op_norm(M.m); }

double smallest_singular_value(const Eigen::MatrixXcd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
  const auto& sv = svd.singularValues();
  return sv(sv.size() - 1);
}

double apply_constant(double s, const DecayContext& ctx, const SpectralModel& model) {
  const double f = s >= 1.0 ? std::pow(2.0, s - 1.0) : 1.0;
  const double a = std::min(1.0, model.c_lo);
  const double rho = std::sqrt(model.lattice_norm2(model.rho));
  const double b = std::max({1.0, model.c_lo, model.C_hi, rho});
  return f * std::sqrt(ctx.S / ctx.K1) * std::pow(b, s) * std::pow(a, -std::max(s, ctx.s0));
}

double near_part_bound(int N, double s, double opnorm, const DecayContext& ctx) {
  return std::sqrt(ctx.K1) * std::pow(2.0 * N + 1.0, 0.5 * ctx.n()) * std::pow(static_cast<double>(N), s) * opnorm;
}

double near_part_bound_unscaled(int N, double s, double opnorm, const DecayContext& ctx) {
  return std::pow(static_cast<double>(N), s + ctx.n()) * opnorm;
}

double decay_along_lines_bound(const BlockMatrix& M, double s, const DecayContext& ctx) {
  const Layout& R = *M.rows;
  const Layout& C = *M.cols;
  const auto& gc = C.groups();
  double best = 0.0;
  const double t = s + ctx.n();
  for (int k = 0; k < R.num_sites(); ++k) {
    const Site& site = R.sites()[k];
    const IntVec ck = concat(site.l, site.j);
    CompensatedSum acc;
    for (std::size_t b = 0; b < gc.size(); ++b) {
      auto blk = M.m.block(R.offset(k), gc[b].offset, R.block_size(k), gc[b].size);
      const double v = block_op_norm(blk);
      if (v == 0.0) continue;
      acc.add(v * v * std::pow(bracket(ck - concat(gc[b].l, gc[b].j)), 2.0 * t));
    }
    best = std::max(best, std::sqrt(ctx.K1 * std::max(0.0, acc.value())));
  }
  return R.max_components() * ctx.K2 * best;
}

BlockMatrix perturbed_left_inverse(const BlockMatrix& Minv, const BlockMatrix& P, const DecayContext& ctx,
                                   const NeumannOptions& opts, NeumannInfo* info) {
  if (!same_layout(Minv.cols, P.rows) || !same_layout(Minv.rows, P.cols))
    throw std::invalid_argument("perturbed_left_inverse: window mismatch");
  const double nMinv = s_norm(Minv, ctx.s0, ctx);
  const double nP = s_norm(P, ctx.s0, ctx);
  const double pre = nMinv * nP;
  if (info) info->precondition = pre;
  if (opts.check_precondition && pre > 0.5)
    throw std::domain_error("perturbed_left_inverse: precondition |Minv|_{s0}|P|_{s0} <= 1/2 violated (" +
                            std::to_string(pre) + ")");
  Eigen::MatrixXcd X = -(Minv.m * P.m);
  Eigen::MatrixXcd term = Minv.m;
  Eigen::MatrixXcd sum = Minv.m;
  double prev = nMinv;
  double max_ratio = 0.0;
  int n = 0;
  const double stop = opts.tol * std::max(nMinv, 1e-300);
  if (nMinv == 0.0 || nP == 0.0) {
    if (info) info->terms = 1;
    return Minv;
  }
  while (true) {
    if (++n > opts.max_terms)
      throw std::runtime_error("perturbed_left_inverse: series did not converge within max terms");
    term = X * term;
    const double tn = s_norm(BlockMatrix(Minv.rows, Minv.cols, term), ctx.s0, ctx);
    sum += term;
    const double ratio = prev > 0 ? tn / prev : 0.0;
    if (n >= 2) max_ratio = std::max(max_ratio, ratio);
    if (n >= 2 && ratio > opts.max_factor && tn > stop)
      throw std::runtime_error("perturbed_left_inverse: measured contraction factor " + std::to_string(ratio) +
                               " exceeds limit");
    prev = tn;
    if (tn < stop) break;
  }
  if (info) {
    info->terms = n + 1;
    info->max_ratio = max_ratio;
  }
  return BlockMatrix(Minv.rows, Minv.cols, sum);
}

}  // namespace smallsep
