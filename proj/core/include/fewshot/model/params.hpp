#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fewshot/common/dual.hpp"
#include "fewshot/common/error.hpp"
#include "fewshot/common/tensor.hpp"

namespace fewshot {

/// One named parameter array.
template <typename T>
struct Param {
  std::string name;
  Dims shape;
  std::vector<T> value;

  friend bool operator==(const Param&, const Param&) = default;
};

/// Ordered list of named parameter arrays belonging to one component.
template <typename T>
struct ParamGroup {
  std::vector<Param<T>> params;

  Param<T>& add(std::string name, Dims shape, T fill = T(0)) {
    const std::size_t n = dims_product(shape);
    params.push_back({std::move(name), std::move(shape), std::vector<T>(n, fill)});
    return params.back();
  }

  [[nodiscard]] const Param<T>* find(std::string_view name) const {
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const Param<T>& p) { return p.name == name; });
    return it == params.end() ? nullptr : &*it;
  }
  [[nodiscard]] Param<T>* find(std::string_view name) {
    return const_cast<Param<T>*>(std::as_const(*this).find(name));
  }
  [[nodiscard]] const Param<T>& at(std::string_view name) const {
    const Param<T>* p = find(name);
    if (p == nullptr) throw ConfigError("no parameter named '" + std::string(name) + "'");
    return *p;
  }
  [[nodiscard]] Param<T>& at(std::string_view name) {
    return const_cast<Param<T>&>(std::as_const(*this).at(name));
  }

  [[nodiscard]] std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
  }
  [[nodiscard]] bool empty() const noexcept { return params.empty(); }

  friend bool operator==(const ParamGroup&, const ParamGroup&) = default;
};

enum class GroupId { theta, epsilon, omega };

/// The three disjoint trainable groups: extractor (theta), projector
/// (epsilon) and classifier (omega).
template <typename T>
struct ParamSet {
  ParamGroup<T> theta;
  ParamGroup<T> epsilon;
  ParamGroup<T> omega;

  ParamGroup<T>& group(GroupId id) {
    switch (id) {
      case GroupId::theta: return theta;
      case GroupId::epsilon: return epsilon;
      case GroupId::omega: break;
    }
    return omega;
  }
  const ParamGroup<T>& group(GroupId id) const {
    return const_cast<ParamSet&>(*this).group(id);
  }

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

inline constexpr GroupId kAllGroups[] = {GroupId::theta, GroupId::epsilon, GroupId::omega};

const char* to_string(GroupId id);

template <typename T>
ParamGroup<T> zeros_like(const ParamGroup<T>& g) {
  ParamGroup<T> out;
  out.params.reserve(g.params.size());
  for (const auto& p : g.params) out.params.push_back({p.name, p.shape, std::vector<T>(p.value.size())});
  return out;
}

template <typename T>
ParamSet<T> zeros_like(const ParamSet<T>& s) {
  return {zeros_like(s.theta), zeros_like(s.epsilon), zeros_like(s.omega)};
}

/// y += a * x over matching groups.
template <typename T, typename S>
void axpy(ParamGroup<T>& y, S a, const ParamGroup<T>& x) {
  for (std::size_t i = 0; i < y.params.size(); ++i) {
    auto& yv = y.params[i].value;
    const auto& xv = x.params[i].value;
    for (std::size_t j = 0; j < yv.size(); ++j) yv[j] += a * xv[j];
  }
}

template <typename T, typename S>
void axpy(ParamSet<T>& y, S a, const ParamSet<T>& x) {
  for (GroupId id : kAllGroups) axpy(y.group(id), a, x.group(id));
}

inline double dot(const ParamGroup<double>& a, const ParamGroup<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    const auto& av = a.params[i].value;
    const auto& bv = b.params[i].value;
    for (std::size_t j = 0; j < av.size(); ++j) s += av[j] * bv[j];
  }
  return s;
}

inline double squared_norm(const ParamSet<double>& s) {
  double n = 0.0;
  for (GroupId id : kAllGroups) n += dot(s.group(id), s.group(id));
  return n;
}

/// Lifts double parameters to dual numbers with derivative parts taken from
/// `direction` (same layout).
ParamGroup<Dual> make_dual(const ParamGroup<double>& values, const ParamGroup<double>& direction);
ParamSet<Dual> make_dual(const ParamSet<double>& values, const ParamSet<double>& direction);

/// Splits dual parameters into primal values and derivative parts.
ParamGroup<double> primal_part(const ParamGroup<Dual>& g);
ParamGroup<double> tangent_part(const ParamGroup<Dual>& g);
ParamSet<double> primal_part(const ParamSet<Dual>& s);
ParamSet<double> tangent_part(const ParamSet<Dual>& s);

}  // namespace fewshot
