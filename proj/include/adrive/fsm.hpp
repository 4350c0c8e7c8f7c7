#pragma once

#include <stdexcept>
#include <string>

namespace adrive {

enum class VehicleState {
  NotAroundIntersection,
  Approach,
  Wait,
  Crossing,
  InDeadlock,
  Yielding,
};

enum class FsmEvent {
  EnterApproachZone,
  ArriveStopLine,
  EnterSection,
  ExitSection,
  DeadlockDetected,
  YieldDecided,
  DeadlockResolved,
};

const char* to_string(VehicleState s);
const char* to_string(FsmEvent e);

struct IllegalTransition : std::logic_error {
  VehicleState state;
  FsmEvent event;
  IllegalTransition(VehicleState s, FsmEvent e)
      : std::logic_error(std::string("illegal transition: ") + to_string(s) +
                         " on " + to_string(e)),
        state(s),
        event(e) {}
};

// Returns the successor state, or throws IllegalTransition for any
// (state, event) pair outside the protocol's edge set.
VehicleState transition(VehicleState state, FsmEvent event);

}  // namespace adrive
