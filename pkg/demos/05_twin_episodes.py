"""
Scripted twin episodes: slips, pop-up obstacles, local recovery
===============================================================
"""

from latticepath.lattice import LatticeCoord, Workspace
from latticepath.twinsim import (
    Event,
    OraclePlanner,
    Scene,
    default_scenario_pack,
    format_outcome_table,
    run_episode_detailed,
    run_scenarios,
)

C = LatticeCoord
table = Workspace(x_min=0, x_max=6, y_min=0, y_max=4, z_min=0, z_max=2)
planner = OraclePlanner()

# a clean pick-and-place
scene = Scene(
    workspace=table,
    end_effector=C(0, 0, 0),
    target=C(4, 1, 0),
    container=frozenset({C(6, 4, 0), C(6, 3, 0)}),
)
r = run_episode_detailed(scene, planner)
print("clean episode: success=%s ticks=%d trace=%d cells" % (
    r.outcome.success, r.ticks, len(r.trace)))

# the object slips to a new cell while the arm is still approaching;
# the planner regrounds from wherever the effector happens to be
slipped = run_episode_detailed(scene, planner, (Event(kind="slip", step=2, cell=C(3, 3, 0)),))
print("slip episode:  success=%s regrounds=%d replanned_globally=%s" % (
    slipped.outcome.success, slipped.outcome.regrounds, slipped.outcome.replanned_globally))

# an obstacle pops up on the route; recovery is a local bypass, not a re-plan
blocked = Scene(
    workspace=table,
    end_effector=C(0, 0, 0),
    target=C(6, 0, 0),
    dynamic_obstacles=((C(3, 0, 0), 1),),
)
detoured = run_episode_detailed(blocked, planner)
print("detour episode: success=%s detours=%d visited_blocked_cell=%s" % (
    detoured.outcome.success, detoured.outcome.detours,
    C(3, 0, 0) in detoured.trace.points))

# an obstacle landing on the target itself is not recoverable
sealed = Scene(
    workspace=table,
    end_effector=C(0, 0, 0),
    target=C(6, 0, 0),
    dynamic_obstacles=((C(6, 0, 0), 0),),
)
print("occluded target:", run_episode_detailed(sealed, planner).outcome.failure_mode)

# the bundled pack covers all of the above plus scripted sensing failures
print()
results = run_scenarios(default_scenario_pack())
print(format_outcome_table(results))
