#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smallsep {

inline constexpr int kMaxDim = 6;

// Fixed-capacity integer vector; unused slots stay zero so that the
// defaulted ordering is lexicographic on the active prefix.
struct IntVec {
  std::array<int, kMaxDim> v{};
  int n = 0;

  IntVec() = default;
  explicit IntVec(int size) : n(size) {
    if (size < 0 || size > kMaxDim) throw std::invalid_argument("IntVec: bad dimension");
  }
  IntVec(std::initializer_list<int> xs) : n(static_cast<int>(xs.size())) {
    if (n > kMaxDim) throw std::invalid_argument("IntVec: bad dimension");
    int i = 0;
    for (int x : xs) v[i++] = x;
  }
  static IntVec from(const std::vector<int>& xs);
  std::vector<int> to_vector() const { return {v.begin(), v.begin() + n}; }

  int size() const { return n; }
  int& operator[](int i) { return v[i]; }
  int operator[](int i) const { return v[i]; }

  auto operator<=>(const IntVec&) const = default;
  bool operator==(const IntVec&) const = default;
};

IntVec operator+(const IntVec& a, const IntVec& b);
IntVec operator-(const IntVec& a, const IntVec& b);
IntVec operator-(const IntVec& a);
IntVec concat(const IntVec& a, const IntVec& b);
int sup_norm(const IntVec& a);
long long dot(const IntVec& a, const IntVec& b);
std::string to_string(const IntVec& a);

struct IntVecHash {
  std::size_t operator()(const IntVec& x) const noexcept;
};

// A point k = (l, j, a) of the index set.
struct Site {
  IntVec l;
  IntVec j;
  int a = 1;

  auto operator<=>(const Site&) const = default;
  bool operator==(const Site&) const = default;
};

std::string to_string(const Site& k);

enum class ModelKind { Torus, Degenerate };

// Lattice geometry and Laplace spectrum. The torus uses the full lattice Z^r
// with rho = 0; the degenerate model is rank 1 with rho = 1, multiplicity
// j + 1 and index set N.
struct SpectralModel {
  ModelKind kind = ModelKind::Torus;
  int d = 1;
  int r = 1;
  int gd = 1;              // group dimension
  Eigen::MatrixXd gram;    // w_i . w_p
  IntVec rho;
  double c_lo = 1.0;       // c |k| <= w_k
  double C_hi = 1.0;       // w_k <= C |k|
  int zden = 1;            // lattice denominator

  static SpectralModel torus(int d, int r);
  static SpectralModel degenerate(int d);

  bool in_index_set(const IntVec& j) const;
  int multiplicity(const IntVec& j) const;
  double lattice_norm2(const IntVec& j) const;  // |j|_2^2 through the Gram matrix
  double eigenvalue(const IntVec& j) const;     // -|j+rho|^2 + |rho|^2
  double raw_weight(const IntVec& l, const IntVec& j) const;
  double weight(const IntVec& l, const IntVec& j) const;
  double weight(const Site& k) const { return weight(k.l, k.j); }
  // Largest multiplicity among |j| <= R, used for scratch sizing.
  int max_multiplicity(int R) const;
  std::string name() const;
};

using ModelPtr = std::shared_ptr<const SpectralModel>;

ModelPtr make_model(SpectralModel m);

}  // namespace smallsep
