#include "optstop/value_family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optstop {

ValueFamily ValueFamily::from_process(const FiltrationTree& tree, const BermudanGrid& grid,
                                      const AdaptedProcess& process) {
  std::vector<RandomVariable> values;
  values.reserve(grid.thetas().size());
  for (const auto& theta : grid.thetas()) values.push_back(sample(tree, process, theta));
  return ValueFamily(std::move(values));
}

RandomVariable ValueFamily::at(const ThetaStrategy& tau) const {
  const auto& indices = tau.indices();
  RandomVariable out{std::vector<double>(indices.size())};
  for (LeafId leaf = 0; leaf < indices.size(); ++leaf) {
    out[leaf] = (*this)[indices[leaf]][leaf];
  }
  return out;
}

double admissibility_defect(const FiltrationTree& tree, const BermudanGrid& grid,
                            const ValueFamily& family) {
  if (family.last_index() != grid.last_index()) {
    throw InvalidInput("family and grid lengths differ");
  }
  double defect = 0.0;
  for (int k = 0; k <= grid.last_index(); ++k) {
    if (!is_measurable_at(tree, family[k], grid.theta(k))) {
      return std::numeric_limits<double>::infinity();
    }
    if (k == grid.last_index()) continue;
    for (LeafId leaf = 0; leaf < tree.leaf_count(); ++leaf) {
      if (grid.theta(k)[leaf] == grid.theta(k + 1)[leaf]) {
        defect = std::max(defect, std::abs(family[k][leaf] - family[k + 1][leaf]));
      }
    }
  }
  return defect;
}

}  // namespace optstop
