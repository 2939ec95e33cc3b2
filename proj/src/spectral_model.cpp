#include "smallsep/spectral_model.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include <fftw3.h>

namespace smallsep {

namespace {

void enumerate_cube(int nd, int R, const std::function<void(const IntVec&)>& fn) {
  IntVec cur(nd);
  for (int p = 0; p < nd; ++p) cur.v[p] = -R;
  if (nd == 0) {
    fn(cur);
    return;
  }
  while (true) {
    fn(cur);
    int p = nd - 1;
    while (p >= 0) {
      if (++cur.v[p] <= R) break;
      cur.v[p] = -R;
      --p;
    }
    if (p < 0) break;
  }
}

struct PlanCache {
  std::mutex mu;
  std::map<std::tuple<int, int, int>, fftw_plan> plans;

  fftw_plan get(int nd, int M, int sign) {
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(nd, M, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    std::vector<int> n(nd, M);
    std::size_t total = 1;
    for (int p = 0; p < nd; ++p) total *= static_cast<std::size_t>(M);
    fftw_complex* a = fftw_alloc_complex(total);
    fftw_complex* b = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(nd, n.data(), a, b, sign, FFTW_ESTIMATE);
    fftw_free(a);
    fftw_free(b);
    plans.emplace(key, plan);
    return plan;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

FourierFunction FourierFunction::constant(int d, int r, cplx c) {
  FourierFunction f(d, r);
  f.coeffs[IntVec(d + r)] = c;
  return f;
}

void FourierFunction::add(const IntVec& l, const IntVec& i, cplx c) {
  if (l.n != d || i.n != r) throw std::invalid_argument("FourierFunction::add: dimension mismatch");
  coeffs[concat(l, i)] += c;
}

cplx FourierFunction::at(const IntVec& key) const {
  auto it = coeffs.find(key);
  return it == coeffs.end() ? cplx(0.0) : it->second;
}

int FourierFunction::radius() const {
  int R = 0;
  for (const auto& [k, c] : coeffs)
    if (c != cplx(0.0)) R = std::max(R, sup_norm(k));
  return R;
}

bool FourierFunction::is_real(double tol) const {
  for (const auto& [k, c] : coeffs)
    if (std::abs(at(-k) - std::conj(c)) > tol) return false;
  return true;
}

double FourierFunction::sobolev_norm(double s) const {
  CompensatedSum acc;
  for (const auto& [k, c] : coeffs) {
    double w2 = 0.0;
    for (int p = 0; p < k.n; ++p) w2 += static_cast<double>(k.v[p]) * k.v[p];
    const double w = std::max(1.0, std::sqrt(w2));
    acc.add(std::pow(w, 2.0 * s) * std::norm(c));
  }
  return std::sqrt(std::max(0.0, acc.value()));
}

FourierFunction FourierFunction::conj() const {
  FourierFunction out(d, r);
  for (const auto& [k, c] : coeffs) out.coeffs[-k] = std::conj(c);
  return out;
}

nlohmann::json FourierFunction::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [k, c] : coeffs) {
    std::vector<int> l(k.v.begin(), k.v.begin() + d);
    std::vector<int> i(k.v.begin() + d, k.v.begin() + d + r);
    arr.push_back({{"l", l}, {"i", i}, {"re", c.real()}, {"im", c.imag()}});
  }
  return arr;
}

FourierFunction FourierFunction::from_json(const nlohmann::json& j, int d, int r) {
  if (!j.is_array()) throw std::invalid_argument("FourierFunction: expected a list of modes");
  FourierFunction f(d, r);
  for (const auto& e : j) {
    const auto l = e.at("l").get<std::vector<int>>();
    const auto i = e.at("i").get<std::vector<int>>();
    if (static_cast<int>(l.size()) != d || static_cast<int>(i.size()) != r)
      throw std::invalid_argument("FourierFunction: mode dimension mismatch");
    f.add(IntVec::from(l), IntVec::from(i), cplx(e.value("re", 0.0), e.value("im", 0.0)));
  }
  return f;
}

FourierFunction random_trig_poly(int d, int r, int radius, std::mt19937_64& rng, bool real, double decay) {
  std::normal_distribution<double> g(0.0, 1.0);
  FourierFunction f(d, r);
  enumerate_cube(d + r, radius, [&](const IntVec& k) {
    const double scale = std::pow(std::max(1, sup_norm(k)), -decay);
    f.coeffs[k] = scale * cplx(g(rng), g(rng));
  });
  if (real) {
    FourierFunction sym(d, r);
    for (const auto& [k, c] : f.coeffs) sym.coeffs[k] = 0.5 * (c + std::conj(f.at(-k)));
    return sym;
  }
  return f;
}

CoeffBox::CoeffBox(int nd, int R) : nd_(nd), R_(R) {
  std::size_t total = 1;
  for (int p = 0; p < nd; ++p) total *= static_cast<std::size_t>(2 * R + 1);
  val_.assign(total, cplx(0.0));
}

std::size_t CoeffBox::index(const IntVec& k) const {
  std::size_t idx = 0;
  for (int p = 0; p < nd_; ++p) idx = idx * static_cast<std::size_t>(2 * R_ + 1) + static_cast<std::size_t>(k.v[p] + R_);
  return idx;
}

IntVec CoeffBox::key(std::size_t idx) const {
  IntVec k(nd_);
  const std::size_t w = static_cast<std::size_t>(2 * R_ + 1);
  for (int p = nd_ - 1; p >= 0; --p) {
    k.v[p] = static_cast<int>(idx % w) - R_;
    idx /= w;
  }
  return k;
}

CoeffBox CoeffBox::from_function(const FourierFunction& f, int R) {
  CoeffBox box(f.d + f.r, R);
  for (const auto& [k, c] : f.coeffs) {
    if (!box.contains(k)) throw std::out_of_range("CoeffBox: mode outside radius");
    box.val_[box.index(k)] += c;
  }
  return box;
}

FourierFunction CoeffBox::to_function(int d, int r, double drop_below) const {
  FourierFunction f(d, r);
  for (std::size_t i = 0; i < val_.size(); ++i)
    if (std::abs(val_[i]) > drop_below) f.coeffs[key(i)] = val_[i];
  return f;
}

CollocationGrid::CollocationGrid(int nd, int M) : nd_(nd), M_(M) {
  if (nd < 1 || M < 1) throw std::invalid_argument("CollocationGrid: bad size");
  total_ = 1;
  for (int p = 0; p < nd; ++p) total_ *= static_cast<std::size_t>(M);
}

std::vector<cplx> CollocationGrid::synthesize(const CoeffBox& c) const {
  if (c.dims() != nd_) throw std::invalid_argument("synthesize: dimension mismatch");
  if (2 * c.radius() + 1 > M_) throw std::invalid_argument("synthesize: grid too small for coefficients");
  fftw_complex* in = fftw_alloc_complex(total_);
  fftw_complex* out = fftw_alloc_complex(total_);
  std::fill(reinterpret_cast<double*>(in), reinterpret_cast<double*>(in) + 2 * total_, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == cplx(0.0)) continue;
    const IntVec k = c.key(i);
    std::size_t idx = 0;
    for (int p = 0; p < nd_; ++p) idx = idx * M_ + static_cast<std::size_t>(((k.v[p] % M_) + M_) % M_);
    in[idx][0] += c[i].real();
    in[idx][1] += c[i].imag();
  }
  fftw_execute_dft(plan_cache().get(nd_, M_, FFTW_BACKWARD), in, out);
  std::vector<cplx> vals(total_);
  for (std::size_t i = 0; i < total_; ++i) vals[i] = cplx(out[i][0], out[i][1]);
  fftw_free(in);
  fftw_free(out);
  return vals;
}

CoeffBox CollocationGrid::analyze(const std::vector<cplx>& values, int R_out) const {
  if (values.size() != total_) throw std::invalid_argument("analyze: value count mismatch");
  if (2 * R_out + 1 > M_) throw std::invalid_argument("analyze: grid too small for output radius");
  fftw_complex* in = fftw_alloc_complex(total_);
  fftw_complex* out = fftw_alloc_complex(total_);
  for (std::size_t i = 0; i < total_; ++i) {
    in[i][0] = values[i].real();
    in[i][1] = values[i].imag();
  }
  fftw_execute_dft(plan_cache().get(nd_, M_, FFTW_FORWARD), in, out);
  CoeffBox box(nd_, R_out);
  const double scale = 1.0 / static_cast<double>(total_);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const IntVec k = box.key(i);
    std::size_t idx = 0;
    for (int p = 0; p < nd_; ++p) idx = idx * M_ + static_cast<std::size_t>(((k.v[p] % M_) + M_) % M_);
    box[i] = cplx(out[idx][0], out[idx][1]) * scale;
  }
  fftw_free(in);
  fftw_free(out);
  return box;
}

double nu0(const SpectralModel& model) { return (2.0 * model.d + model.gd + model.r + 1.0) / 2.0; }

BlockMatrix multiplication_matrix(const SpectralModel& model, const FourierFunction& b, const LayoutPtr& rows,
                                  const LayoutPtr& cols) {
  if (model.kind != ModelKind::Torus)
    throw std::invalid_argument("multiplication_matrix: Fourier symbols need the torus model; use blocks");
  if (b.d != model.d || b.r != model.r || rows->model().kind != ModelKind::Torus)
    throw std::invalid_argument("multiplication_matrix: window/model mismatch");
  BlockMatrix M(rows, cols);
  const auto& rs = rows->sites();
  const auto& cs = cols->sites();
  for (int a = 0; a < rows->num_sites(); ++a) {
    const IntVec ka = concat(rs[a].l, rs[a].j);
    for (int c = 0; c < cols->num_sites(); ++c) {
      if (rs[a].a != cs[c].a) continue;
      const cplx v = b.at(ka - concat(cs[c].l, cs[c].j));
      if (v != cplx(0.0)) M.m(rows->offset(a), cols->offset(c)) = v;
    }
  }
  return M;
}

BlockMatrix multiplication_matrix_blocks(const BlockSymbol& sym, const LayoutPtr& rows, const LayoutPtr& cols) {
  BlockMatrix M(rows, cols);
  const auto& rs = rows->sites();
  const auto& cs = cols->sites();
  for (int a = 0; a < rows->num_sites(); ++a) {
    for (int c = 0; c < cols->num_sites(); ++c) {
      if (rs[a].a != cs[c].a) continue;
      Eigen::MatrixXcd blk = sym(rs[a].l - cs[c].l, rs[a].j, cs[c].j);
      if (blk.size() == 0) continue;
      if (blk.rows() != rows->block_size(a) || blk.cols() != cols->block_size(c))
        throw std::invalid_argument("multiplication_matrix_blocks: block shape does not match multiplicities");
      M.m.block(rows->offset(a), cols->offset(c), blk.rows(), blk.cols()) = blk;
    }
  }
  return M;
}

BlockSymbol synthetic_degenerate_symbol(const SpectralModel& model, std::uint64_t seed, double amplitude,
                                        double decay, int support) {
  auto raw = [model, seed, amplitude, decay, support](const IntVec& dl, const IntVec& j,
                                                       const IntVec& jp) -> Eigen::MatrixXcd {
    const int dist = std::max(sup_norm(dl), sup_norm(j - jp));
    const int rows = model.multiplicity(j);
    const int cols = model.multiplicity(jp);
    if (dist > support) return Eigen::MatrixXcd::Zero(rows, cols);
    std::uint64_t h = mix64(seed);
    for (int p = 0; p < dl.n; ++p) h = mix64(h ^ static_cast<std::uint64_t>(dl.v[p] + 1000));
    for (int p = 0; p < j.n; ++p) h = mix64(h ^ static_cast<std::uint64_t>(j.v[p] + 5000));
    for (int p = 0; p < jp.n; ++p) h = mix64(h ^ static_cast<std::uint64_t>(jp.v[p] + 9000));
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXcd B(rows, cols);
    for (int a = 0; a < rows; ++a)
      for (int b = 0; b < cols; ++b) B(a, b) = cplx(u(rng), u(rng));
    const double nb = block_op_norm(B);
    const double target = amplitude * std::pow(std::max(1, dist), -decay);
    if (nb > 0) B *= target / nb;
    return B;
  };
  return [raw](const IntVec& dl, const IntVec& j, const IntVec& jp) -> Eigen::MatrixXcd {
    const IntVec mdl = -dl;
    if (std::tie(dl, j, jp) < std::tie(mdl, jp, j)) return raw(dl, j, jp);
    if (dl == mdl && j == jp) {
      Eigen::MatrixXcd B = raw(dl, j, jp);
      return 0.5 * (B + B.adjoint());
    }
    return raw(mdl, jp, j).adjoint();
  };
}

}  // namespace smallsep
