#include "smallsep/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace smallsep {

IntVec IntVec::from(const std::vector<int>& xs) {
  IntVec out(static_cast<int>(xs.size()));
  for (int i = 0; i < out.n; ++i) out.v[i] = xs[i];
  return out;
}

IntVec operator+(const IntVec& a, const IntVec& b) {
  if (a.n != b.n) throw std::invalid_argument("IntVec: dimension mismatch");
  IntVec out(a.n);
  for (int i = 0; i < a.n; ++i) out.v[i] = a.v[i] + b.v[i];
  return out;
}

IntVec operator-(const IntVec& a, const IntVec& b) {
  if (a.n != b.n) throw std::invalid_argument("IntVec: dimension mismatch");
  IntVec out(a.n);
  for (int i = 0; i < a.n; ++i) out.v[i] = a.v[i] - b.v[i];
  return out;
}

IntVec operator-(const IntVec& a) {
  IntVec out(a.n);
  for (int i = 0; i < a.n; ++i) out.v[i] = -a.v[i];
  return out;
}

IntVec concat(const IntVec& a, const IntVec& b) {
  IntVec out(a.n + b.n);
  for (int i = 0; i < a.n; ++i) out.v[i] = a.v[i];
  for (int i = 0; i < b.n; ++i) out.v[a.n + i] = b.v[i];
  return out;
}

int sup_norm(const IntVec& a) {
  int m = 0;
  for (int i = 0; i < a.n; ++i) m = std::max(m, std::abs(a.v[i]));
  return m;
}

long long dot(const IntVec& a, const IntVec& b) {
  long long s = 0;
  for (int i = 0; i < a.n; ++i) s += static_cast<long long>(a.v[i]) * b.v[i];
  return s;
}

std::string to_string(const IntVec& a) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < a.n; ++i) os << (i ? "," : "") << a.v[i];
  os << ')';
  return os.str();
}

std::size_t IntVecHash::operator()(const IntVec& x) const noexcept {
  std::size_t h = static_cast<std::size_t>(x.n) * 0x9E3779B97F4A7C15ull;
  for (int i = 0; i < x.n; ++i) {
    h ^= static_cast<std::size_t>(x.v[i] + 0x40000000) + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::string to_string(const Site& k) {
  return "l=" + to_string(k.l) + " j=" + to_string(k.j) + " a=" + std::to_string(k.a);
}

SpectralModel SpectralModel::torus(int d, int r) {
  if (d < 1 || r < 1 || d + r > kMaxDim) throw std::invalid_argument("torus: bad dimensions");
  SpectralModel m;
  m.kind = ModelKind::Torus;
  m.d = d;
  m.r = r;
  m.gd = r;
  m.gram = Eigen::MatrixXd::Identity(r, r);
  m.rho = IntVec(r);
  m.c_lo = 1.0;
  m.C_hi = std::sqrt(static_cast<double>(d + r));
  m.zden = 1;
  return m;
}

SpectralModel SpectralModel::degenerate(int d) {
  if (d < 1 || d + 1 > kMaxDim) throw std::invalid_argument("degenerate: bad dimensions");
  SpectralModel m;
  m.kind = ModelKind::Degenerate;
  m.d = d;
  m.r = 1;
  m.gd = 3;
  m.gram = Eigen::MatrixXd::Identity(1, 1);
  m.rho = IntVec{1};
  m.c_lo = 1.0;
  // w^2 = |l|^2 + (j+1)^2 <= d|k|^2 + 4|k|^2 for |k| >= 1.
  m.C_hi = std::sqrt(static_cast<double>(d + 4));
  m.zden = 1;
  return m;
}

bool SpectralModel::in_index_set(const IntVec& j) const {
  if (j.n != r) return false;
  if (kind == ModelKind::Degenerate) return j.v[0] >= 0;
  return true;
}

int SpectralModel::multiplicity(const IntVec& j) const {
  if (!in_index_set(j)) throw std::out_of_range("multiplicity: j outside index set " + to_string(j));
  if (kind == ModelKind::Degenerate) return j.v[0] + 1;
  return 1;
}

double SpectralModel::lattice_norm2(const IntVec& j) const {
  double s = 0.0;
  for (int p = 0; p < r; ++p)
    for (int q = 0; q < r; ++q) s += gram(p, q) * j.v[p] * j.v[q];
  return s;
}

double SpectralModel::eigenvalue(const IntVec& j) const {
  if (!in_index_set(j)) throw std::out_of_range("eigenvalue: j outside index set " + to_string(j));
  return -lattice_norm2(j + rho) + lattice_norm2(rho);
}

double SpectralModel::raw_weight(const IntVec& l, const IntVec& j) const {
  double s = 0.0;
  for (int i = 0; i < l.n; ++i) s += static_cast<double>(l.v[i]) * l.v[i];
  return std::sqrt(s + lattice_norm2(j + rho));
}

double SpectralModel::weight(const IntVec& l, const IntVec& j) const {
  return std::max({c_lo, 1.0, raw_weight(l, j)});
}

int SpectralModel::max_multiplicity(int R) const {
  return kind == ModelKind::Degenerate ? R + 1 : 1;
}

std::string SpectralModel::name() const {
  return kind == ModelKind::Torus ? "torus" : "degenerate";
}

ModelPtr make_model(SpectralModel m) { return std::make_shared<const SpectralModel>(std::move(m)); }

}  // namespace smallsep
