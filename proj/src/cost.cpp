#include "adrive/cost.hpp"

#include <algorithm>

namespace adrive {

double yielding_cost_comm(const CostParams& p, const CostInputs& in) {
  return p.s_comm * in.d_space + p.t_comm * in.n_followers;
}

double yielding_cost_perception(const CostParams& p, const CostInputs& in) {
  return p.s_perception * in.d_space + p.t_perception * (in.follower_present ? 1.0 : 0.0);
}

double threshold_wait(const CostParams& p, double chi, double r) {
  return p.a * chi + p.r_scale * r;
}

bool outranks(const Contender& a, const Contender& b) {
  if (a.rho != b.rho) return a.rho;
  if (a.chi != b.chi) return a.chi > b.chi;
  if (a.r != b.r) return a.r > b.r;
  return a.id < b.id;
}

std::vector<Contender> priority_order(std::vector<Contender> contenders) {
  std::sort(contenders.begin(), contenders.end(),
            [](const Contender& a, const Contender& b) { return outranks(a, b); });
  return contenders;
}

}  // namespace adrive
