#include "adrive/fsm.hpp"

namespace adrive {

const char* to_string(VehicleState s) {
  switch (s) {
    case VehicleState::NotAroundIntersection: return "NOT_AROUND_INTERSECTION";
    case VehicleState::Approach: return "APPROACH";
    case VehicleState::Wait: return "WAIT";
    case VehicleState::Crossing: return "CROSSING";
    case VehicleState::InDeadlock: return "IN_DEADLOCK";
    case VehicleState::Yielding: return "YIELDING";
  }
  return "?";
}

const char* to_string(FsmEvent e) {
  switch (e) {
    case FsmEvent::EnterApproachZone: return "ENTER_APPROACH_ZONE";
    case FsmEvent::ArriveStopLine: return "ARRIVE_STOP_LINE";
    case FsmEvent::EnterSection: return "ENTER_SECTION";
    case FsmEvent::ExitSection: return "EXIT_SECTION";
    case FsmEvent::DeadlockDetected: return "DEADLOCK_DETECTED";
    case FsmEvent::YieldDecided: return "YIELD_DECIDED";
    case FsmEvent::DeadlockResolved: return "DEADLOCK_RESOLVED";
  }
  return "?";
}

VehicleState transition(VehicleState state, FsmEvent event) {
  using S = VehicleState;
  using E = FsmEvent;
  switch (event) {
    case E::EnterApproachZone:
      if (state == S::NotAroundIntersection) return S::Approach;
      break;
    case E::ArriveStopLine:
      if (state == S::Approach) return S::Wait;
      break;
    case E::EnterSection:
      if (state == S::Wait || state == S::Approach) return S::Crossing;
      break;
    case E::ExitSection:
      if (state == S::Crossing) return S::NotAroundIntersection;
      break;
    case E::DeadlockDetected:
      if (state == S::Wait || state == S::Crossing) return S::InDeadlock;
      break;
    case E::YieldDecided:
      if (state == S::InDeadlock) return S::Yielding;
      break;
    case E::DeadlockResolved:
      if (state == S::InDeadlock) return S::Crossing;
      break;
  }
  // A yielding vehicle re-queues at its evacuation point.
  if (event == E::ArriveStopLine && state == S::Yielding) return S::Wait;
  throw IllegalTransition(state, event);
}

}  // namespace adrive
