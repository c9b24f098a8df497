#include "sqz/maskgen/params.hpp"

#include <cmath>
#include <numbers>

#include "sqz/common/error.hpp"

namespace sqz::maskgen {

std::vector<Bound> ParamSpace::bounds() const {
  std::vector<Bound> b;
  b.reserve(dimension());
  for (int side = 0; side < 2; ++side) {
    for (std::size_t t = 0; t < keys.size(); ++t) b.push_back({-zernike_bound, zernike_bound});
    b.push_back({-gamma_bound, gamma_bound});
    b.push_back({-gamma_bound, gamma_bound});
    b.push_back({0.0, std::numbers::pi / 2});
    b.push_back({-mu_bound, mu_bound});
    b.push_back({-mu_bound, mu_bound});
  }
  return b;
}

std::vector<std::string> ParamSpace::names() const {
  std::vector<std::string> out;
  for (const char* side : {"L", "R"}) {
    for (const auto& k : keys) out.push_back(std::string(side) + "." + to_string(k));
    for (const char* lens : {"gamma1", "gamma2", "theta_lens", "mu_x", "mu_y"})
      out.push_back(std::string(side) + "." + lens);
  }
  return out;
}

MaskParams MaskParams::zeros(const ParamSpace& space) {
  MaskParams p;
  for (const auto& k : space.keys) {
    p.left.zernike.push_back({k, 0.0});
    p.right.zernike.push_back({k, 0.0});
  }
  return p;
}

MaskParams MaskParams::unflatten(const ParamSpace& space, std::span<const double> flat) {
  require(flat.size() == space.dimension(),
          "parameter vector has " + std::to_string(flat.size()) + " entries, expected " +
              std::to_string(space.dimension()));
  MaskParams p = zeros(space);
  std::size_t i = 0;
  for (PanelParams* panel : {&p.left, &p.right}) {
    for (auto& term : panel->zernike) term.coeff = flat[i++];
    panel->gamma1 = flat[i++];
    panel->gamma2 = flat[i++];
    panel->theta_lens = flat[i++];
    panel->mu_x = flat[i++];
    panel->mu_y = flat[i++];
  }
  return p;
}

std::vector<double> MaskParams::flatten() const {
  std::vector<double> out;
  for (const PanelParams* panel : {&left, &right}) {
    for (const auto& term : panel->zernike) out.push_back(term.coeff);
    out.insert(out.end(),
               {panel->gamma1, panel->gamma2, panel->theta_lens, panel->mu_x, panel->mu_y});
  }
  return out;
}

void MaskParams::check(const ParamSpace& space) const {
  for (const PanelParams* panel : {&left, &right}) {
    require(panel->zernike.size() == space.keys.size(), "Zernike key set does not match space");
    for (std::size_t t = 0; t < space.keys.size(); ++t)
      require(panel->zernike[t].index == space.keys[t], "Zernike key set does not match space");
  }
  const auto flat = flatten();
  const auto bounds = space.bounds();
  const auto names = space.names();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    require(std::isfinite(flat[i]), "parameter " + names[i] + " is not finite");
    require(flat[i] >= bounds[i].lo && flat[i] <= bounds[i].hi,
            "parameter " + names[i] + " = " + std::to_string(flat[i]) + " outside bounds");
  }
}

nlohmann::json params_to_json(const MaskParams& p) { return nlohmann::json(p.flatten()); }

MaskParams params_from_json(const ParamSpace& space, const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("parameter vector must be a JSON array");
  if (j.size() != space.dimension())
    throw ConfigError("parameter vector has " + std::to_string(j.size()) + " entries, expected " +
                      std::to_string(space.dimension()));
  std::vector<double> flat;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError("parameter vector entry " + std::to_string(i) + " is not a number");
    flat.push_back(j[i].get<double>());
  }
  return MaskParams::unflatten(space, flat);
}

}  // namespace sqz::maskgen
