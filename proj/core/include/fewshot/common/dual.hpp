#pragma once

#include <cmath>

namespace fewshot {

/// Forward-mode dual number: value plus one directional derivative. Running
/// the (reverse-mode) gradient code on Dual parameters seeded with a direction
/// v yields the exact Hessian-vector product in the derivative parts.
struct Dual {
  double val = 0.0;
  double eps = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : val(v) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double v, double e) : val(v), eps(e) {}

  constexpr Dual& operator+=(const Dual& o) {
    val += o.val;
    eps += o.eps;
    return *this;
  }
  constexpr Dual& operator-=(const Dual& o) {
    val -= o.val;
    eps -= o.eps;
    return *this;
  }
  constexpr Dual& operator*=(const Dual& o) {
    eps = eps * o.val + val * o.eps;
    val *= o.val;
    return *this;
  }
  constexpr Dual& operator/=(const Dual& o) {
    eps = (eps * o.val - val * o.eps) / (o.val * o.val);
    val /= o.val;
    return *this;
  }
};

constexpr Dual operator-(const Dual& a) { return {-a.val, -a.eps}; }
constexpr Dual operator+(Dual a, const Dual& b) { return a += b; }
constexpr Dual operator-(Dual a, const Dual& b) { return a -= b; }
constexpr Dual operator*(Dual a, const Dual& b) { return a *= b; }
constexpr Dual operator/(Dual a, const Dual& b) { return a /= b; }

// Control flow (max-pool, ReLU, argmax) follows the primal value.
constexpr bool operator<(const Dual& a, const Dual& b) { return a.val < b.val; }
constexpr bool operator>(const Dual& a, const Dual& b) { return a.val > b.val; }
constexpr bool operator<=(const Dual& a, const Dual& b) { return a.val <= b.val; }
constexpr bool operator>=(const Dual& a, const Dual& b) { return a.val >= b.val; }
constexpr bool operator==(const Dual& a, const Dual& b) { return a.val == b.val; }

inline Dual exp(const Dual& a) {
  const double e = std::exp(a.val);
  return {e, e * a.eps};
}
inline Dual log(const Dual& a) { return {std::log(a.val), a.eps / a.val}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.val);
  return {s, a.eps / (2.0 * s)};
}

constexpr double value_of(double x) { return x; }
constexpr double value_of(const Dual& x) { return x.val; }

}  // namespace fewshot
