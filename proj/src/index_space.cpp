#include "smallsep/index_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smallsep {

namespace {

std::size_t site_hash(const Site& k) {
  IntVecHash h;
  return h(k.l) * 31u + h(k.j) * 17u + static_cast<std::size_t>(k.a + 7);
}

void enumerate_box(const IntVec& lo, const IntVec& hi, const std::function<void(const IntVec&)>& fn) {
  const int n = lo.n;
  if (n == 0) {
    fn(IntVec(0));
    return;
  }
  IntVec cur = lo;
  while (true) {
    fn(cur);
    int p = n - 1;
    while (p >= 0) {
      if (++cur.v[p] <= hi.v[p]) break;
      cur.v[p] = lo.v[p];
      --p;
    }
    if (p < 0) break;
  }
}

}  // namespace

int site_abs(const Site& k) { return std::max(sup_norm(k.l), sup_norm(k.j)); }

int index_dist(const IntVec& l1, const IntVec& j1, const IntVec& l2, const IntVec& j2) {
  if (l1.n != l2.n || j1.n != j2.n) throw std::invalid_argument("dist: dimension mismatch");
  return std::max(sup_norm(l1 - l2), sup_norm(j1 - j2));
}

int dist(const Site& k, const Site& kp) {
  const int base = index_dist(k.l, k.j, kp.l, kp.j);
  if (base == 0 && k.a != kp.a) return 1;
  return base;
}

std::shared_ptr<const Layout> Layout::from_sites(ModelPtr model, std::vector<Site> sites) {
  auto out = std::shared_ptr<Layout>(new Layout());
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  out->model_ = model;
  out->sites_ = std::move(sites);
  const int n = out->num_sites();
  out->offset_.resize(n);
  out->size_.resize(n);
  out->group_of_.resize(n);
  int off = 0;
  for (int s = 0; s < n; ++s) {
    const Site& k = out->sites_[s];
    if (k.l.n != model->d || k.j.n != model->r) throw std::invalid_argument("layout: site dimension mismatch");
    const int m = model->multiplicity(k.j);
    out->offset_[s] = off;
    out->size_[s] = m;
    off += m;
    if (out->groups_.empty() || out->groups_.back().l != k.l || out->groups_.back().j != k.j) {
      Group g;
      g.l = k.l;
      g.j = k.j;
      g.first_site = s;
      g.offset = out->offset_[s];
      out->groups_.push_back(g);
    }
    Group& g = out->groups_.back();
    g.nsites += 1;
    g.size += m;
    out->group_of_[s] = static_cast<int>(out->groups_.size()) - 1;
    out->lookup_[site_hash(k)].push_back(s);
  }
  out->dim_ = off;
  for (const auto& g : out->groups_) out->max_comps_ = std::max(out->max_comps_, g.nsites);
  const int nd = model->d + model->r;
  out->lo_ = IntVec(nd);
  out->hi_ = IntVec(nd);
  bool first = true;
  for (const auto& g : out->groups_) {
    const IntVec c = concat(g.l, g.j);
    for (int p = 0; p < nd; ++p) {
      if (first || c.v[p] < out->lo_.v[p]) out->lo_.v[p] = c.v[p];
      if (first || c.v[p] > out->hi_.v[p]) out->hi_.v[p] = c.v[p];
    }
    first = false;
  }
  return out;
}

std::shared_ptr<const Layout> Layout::window(ModelPtr model, const IntVec& l_center, const IntVec& j_center, int N,
                                             const std::vector<int>& comps) {
  if (N < 0) throw std::invalid_argument("window: negative radius");
  if (l_center.n != model->d || j_center.n != model->r) throw std::invalid_argument("window: center dimension");
  const int nd = model->d + model->r;
  IntVec c = concat(l_center, j_center);
  IntVec lo(nd), hi(nd);
  for (int p = 0; p < nd; ++p) {
    lo.v[p] = c.v[p] - N;
    hi.v[p] = c.v[p] + N;
  }
  std::vector<Site> sites;
  enumerate_box(lo, hi, [&](const IntVec& x) {
    Site k;
    k.l = IntVec(model->d);
    k.j = IntVec(model->r);
    for (int p = 0; p < model->d; ++p) k.l.v[p] = x.v[p];
    for (int p = 0; p < model->r; ++p) k.j.v[p] = x.v[model->d + p];
    if (!model->in_index_set(k.j)) return;
    for (int a : comps) {
      k.a = a;
      sites.push_back(k);
    }
  });
  return from_sites(model, std::move(sites));
}

std::shared_ptr<const Layout> Layout::ball(ModelPtr model, int N, const std::vector<int>& comps) {
  return window(model, IntVec(model->d), IntVec(model->r), N, comps);
}

int Layout::find(const Site& k) const {
  auto it = lookup_.find(site_hash(k));
  if (it == lookup_.end()) return -1;
  for (int s : it->second)
    if (sites_[s] == k) return s;
  return -1;
}

bool Layout::same_as(const Layout& other) const {
  return this == &other || (sites_ == other.sites_ && model_->kind == other.model_->kind);
}

bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->same_as(*b);
}

SeqVec::SeqVec(LayoutPtr layout) : layout_(std::move(layout)), data_(Eigen::VectorXcd::Zero(layout_->dim())) {}

SeqVec::SeqVec(LayoutPtr layout, Eigen::VectorXcd data) : layout_(std::move(layout)), data_(std::move(data)) {
  if (data_.size() != layout_->dim()) throw std::invalid_argument("SeqVec: data size does not match layout");
}

Eigen::VectorXcd SeqVec::at(const Site& k) const {
  const int s = layout_->find(k);
  if (s < 0) return Eigen::VectorXcd();
  return block(s);
}

void SeqVec::set(const Site& k, const Eigen::VectorXcd& value) {
  const int s = layout_->find(k);
  if (s < 0) throw std::out_of_range("SeqVec::set: site outside layout " + to_string(k));
  if (value.size() != layout_->block_size(s)) throw std::invalid_argument("SeqVec::set: block length != d_j");
  block(s) = value;
}

SeqVec SeqVec::operator+(const SeqVec& o) const {
  if (!same_layout(layout_, o.layout_)) throw std::invalid_argument("SeqVec: layout mismatch");
  return SeqVec(layout_, data_ + o.data_);
}

SeqVec SeqVec::operator-(const SeqVec& o) const {
  if (!same_layout(layout_, o.layout_)) throw std::invalid_argument("SeqVec: layout mismatch");
  return SeqVec(layout_, data_ - o.data_);
}

SeqVec SeqVec::operator*(cplx c) const { return SeqVec(layout_, data_ * c); }

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x))
    comp_ += (sum_ - t) + x;
  else
    comp_ += (x - t) + sum_;
  sum_ = t;
}

double sobolev_norm(const SeqVec& u, double s) {
  if (s < 0) throw std::invalid_argument("sobolev_norm: s < 0");
  const Layout& L = *u.layout();
  CompensatedSum acc;
  for (int i = 0; i < L.num_sites(); ++i) {
    const double b2 = u.block(i).squaredNorm();
    if (b2 == 0.0) continue;
    const double w = L.model().weight(L.sites()[i]);
    acc.add(std::pow(w, 2.0 * s) * b2);
  }
  return std::sqrt(std::max(0.0, acc.value()));
}

SeqVec project(const SeqVec& u, int N) {
  if (N < 0) throw std::invalid_argument("project: N < 0");
  SeqVec out = u;
  const Layout& L = *u.layout();
  for (int i = 0; i < L.num_sites(); ++i)
    if (site_abs(L.sites()[i]) > N) out.block(i).setZero();
  return out;
}

SeqVec transfer(const SeqVec& u, const LayoutPtr& target) {
  SeqVec out(target);
  const Layout& src = *u.layout();
  for (int i = 0; i < target->num_sites(); ++i) {
    const int s = src.find(target->sites()[i]);
    if (s >= 0) out.block(i) = u.block(s);
  }
  return out;
}

bool interpolation_check(const SeqVec& u, double s1, double s2, double t, double rel_tol) {
  if (!(s1 < s2) || t < 0.0 || t > 1.0) throw std::invalid_argument("interpolation_check: bad arguments");
  const double lhs = sobolev_norm(u, t * s1 + (1.0 - t) * s2);
  const double rhs = std::pow(sobolev_norm(u, s1), t) * std::pow(sobolev_norm(u, s2), 1.0 - t);
  return lhs <= rhs * (1.0 + rel_tol) + 1e-300;
}

double smoothing_ratio_p1(const SeqVec& u, int N, double s, double nu) {
  const double den = std::pow(static_cast<double>(N), nu) * sobolev_norm(u, s);
  if (den == 0.0) return 0.0;
  return sobolev_norm(project(u, N), s + nu) / den;
}

double smoothing_ratio_p2(const SeqVec& u, int N, double s, double nu) {
  const double den = std::pow(static_cast<double>(N), -nu) * sobolev_norm(u, s + nu);
  if (den == 0.0) return 0.0;
  SeqVec tail = u - project(u, N);
  return sobolev_norm(tail, s) / den;
}

}  // namespace smallsep
