#pragma once

#include <vector>

namespace adrive {

// Scale factors for the yielding-cost and threshold-wait formulas.
struct CostParams {
  double s_comm = 1.0;         // cost per meter of backing distance
  double t_comm = 20.0;        // cost per following vehicle
  double s_perception = 1.0;   // cost per meter
  double t_perception = 20.0;  // cost for follower presence
  double a = 0.1;              // seconds of patience per cost unit
  double r_scale = 1.0;        // seconds; range of the tie-break term
};

struct CostInputs {
  double d_space = 0.0;   // meters to the evacuation site
  int n_followers = 0;    // follower count, communication-derived
  bool follower_present = false;  // G, perception-derived
};

// chi = s_comm * D_SPACE + t_comm * N_f
double yielding_cost_comm(const CostParams& p, const CostInputs& in);

// chi = s_perception * D_SPACE + t_perception * G
double yielding_cost_perception(const CostParams& p, const CostInputs& in);

// Delta = a * chi + r_scale * R
double threshold_wait(const CostParams& p, double chi, double r);

struct Contender {
  int id = 0;
  bool rho = false;   // believed localization state
  double chi = 0.0;   // yielding cost
  double r = 0.0;     // tie-break draw
};

// True when `a` outranks `b`. Rules, in order: rho=1 beats rho=0; larger
// chi wins; chi ties go to the larger R; exact R ties break by lowest id.
bool outranks(const Contender& a, const Contender& b);

// Highest priority first; deterministic for any input.
std::vector<Contender> priority_order(std::vector<Contender> contenders);

}  // namespace adrive
