#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include <json.hpp>

#include "smallsep/decay_matrix.hpp"

namespace smallsep {

// Trigonometric polynomial on T^d x T^r: coefficients keyed by the combined
// index (l, i).
struct FourierFunction {
  int d = 1;
  int r = 1;
  std::map<IntVec, cplx> coeffs;

  FourierFunction() = default;
  FourierFunction(int d_, int r_) : d(d_), r(r_) {}

  static FourierFunction constant(int d, int r, cplx c);
  void add(const IntVec& l, const IntVec& i, cplx c);
  cplx at(const IntVec& key) const;
  int radius() const;
  bool is_real(double tol = 0.0) const;  // coeff(-k) == conj(coeff(k))
  double sobolev_norm(double s) const;   // torus weights
  FourierFunction conj() const;          // Fourier data of the pointwise conjugate

  nlohmann::json to_json() const;
  static FourierFunction from_json(const nlohmann::json& j, int d, int r);
};

FourierFunction random_trig_poly(int d, int r, int radius, std::mt19937_64& rng, bool real, double decay = 0.0);

// Dense (2R+1)^n coefficient array on the combined index box.
class CoeffBox {
 public:
  CoeffBox() = default;
  CoeffBox(int nd, int R);

  int dims() const { return nd_; }
  int radius() const { return R_; }
  std::size_t size() const { return val_.size(); }
  bool contains(const IntVec& k) const { return sup_norm(k) <= R_; }
  std::size_t index(const IntVec& k) const;
  IntVec key(std::size_t idx) const;
  cplx& operator[](std::size_t idx) { return val_[idx]; }
  cplx operator[](std::size_t idx) const { return val_[idx]; }
  cplx at(const IntVec& k) const { return contains(k) ? val_[index(k)] : cplx(0.0); }
  void set(const IntVec& k, cplx v) { val_[index(k)] = v; }

  static CoeffBox from_function(const FourierFunction& f, int R);
  FourierFunction to_function(int d, int r, double drop_below = 0.0) const;

 private:
  int nd_ = 0;
  int R_ = 0;
  std::vector<cplx> val_;
};

// Physical-space grid with M points per axis; synthesis and analysis via FFT.
class CollocationGrid {
 public:
  CollocationGrid(int nd, int M);

  int dims() const { return nd_; }
  int points_per_axis() const { return M_; }
  std::size_t size() const { return total_; }

  std::vector<cplx> synthesize(const CoeffBox& c) const;
  CoeffBox analyze(const std::vector<cplx>& values, int R_out) const;

 private:
  int nd_;
  int M_;
  std::size_t total_;
};

double nu0(const SpectralModel& model);

// Multiplication by a trigonometric polynomial on the torus; components act
// independently.
BlockMatrix multiplication_matrix(const SpectralModel& model, const FourierFunction& b, const LayoutPtr& rows,
                                  const LayoutPtr& cols);

// Caller-supplied blocks B(l - l', j, j') of shape d_j x d_j'.
using BlockSymbol = std::function<Eigen::MatrixXcd(const IntVec& dl, const IntVec& j, const IntVec& jp)>;

BlockMatrix multiplication_matrix_blocks(const BlockSymbol& sym, const LayoutPtr& rows, const LayoutPtr& cols);

// Deterministic synthetic blocks for the degenerate model with
// ||B|| <= amplitude <(dl, j - j')>^{-decay} and B(dl,j,j') = B(-dl,j',j)^*.
BlockSymbol synthetic_degenerate_symbol(const SpectralModel& model, std::uint64_t seed, double amplitude,
                                        double decay, int support);

}  // namespace smallsep
