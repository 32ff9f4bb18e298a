#include "fewshot/model/params.hpp"

namespace fewshot {

const char* to_string(GroupId id) {
  switch (id) {
    case GroupId::theta: return "theta";
    case GroupId::epsilon: return "epsilon";
    case GroupId::omega: return "omega";
  }
  return "?";
}

ParamGroup<Dual> make_dual(const ParamGroup<double>& values, const ParamGroup<double>& direction) {
  ParamGroup<Dual> out;
  out.params.reserve(values.params.size());
  for (std::size_t i = 0; i < values.params.size(); ++i) {
    const auto& p = values.params[i];
    const auto& d = direction.params[i].value;
    Param<Dual> q{p.name, p.shape, std::vector<Dual>(p.value.size())};
    for (std::size_t j = 0; j < p.value.size(); ++j) q.value[j] = Dual(p.value[j], d[j]);
    out.params.push_back(std::move(q));
  }
  return out;
}

ParamSet<Dual> make_dual(const ParamSet<double>& values, const ParamSet<double>& direction) {
  return {make_dual(values.theta, direction.theta), make_dual(values.epsilon, direction.epsilon),
          make_dual(values.omega, direction.omega)};
}

namespace {

template <typename F>
ParamGroup<double> map_dual(const ParamGroup<Dual>& g, F f) {
  ParamGroup<double> out;
  out.params.reserve(g.params.size());
  for (const auto& p : g.params) {
    Param<double> q{p.name, p.shape, std::vector<double>(p.value.size())};
    for (std::size_t j = 0; j < p.value.size(); ++j) q.value[j] = f(p.value[j]);
    out.params.push_back(std::move(q));
  }
  return out;
}

}  // namespace

ParamGroup<double> primal_part(const ParamGroup<Dual>& g) {
  return map_dual(g, [](const Dual& d) { return d.val; });
}
ParamGroup<double> tangent_part(const ParamGroup<Dual>& g) {
  return map_dual(g, [](const Dual& d) { return d.eps; });
}
ParamSet<double> primal_part(const ParamSet<Dual>& s) {
  return {primal_part(s.theta), primal_part(s.epsilon), primal_part(s.omega)};
}
ParamSet<double> tangent_part(const ParamSet<Dual>& s) {
  return {tangent_part(s.theta), tangent_part(s.epsilon), tangent_part(s.omega)};
}

}  // namespace fewshot
