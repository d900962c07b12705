"""
Lattice basics: cells, workspaces, and the BFS planner
======================================================
"""

from latticepath.lattice import (
    MOVES,
    STOP,
    LatticeCoord,
    cell_center_mm,
    desk_workspace,
    legal_moves,
    manhattan,
    neighbors,
    voxelize,
)
from latticepath.corpus import oracle_path

# the six canonical moves, in the order every mask and logit row uses
print("moves:", MOVES)
print("stop index:", STOP)

w = desk_workspace()
print("desk box:", (w.x_min, w.x_max), (w.y_min, w.y_max), (w.z_min, w.z_max))

# physical <-> cell round trip (20 mm per cell)
p_mm = (47.0, -12.5, 61.0)
cell = voxelize(p_mm, w)
print("voxelize", p_mm, "->", cell.as_tuple(), "center", cell_center_mm(cell, w))

a = LatticeCoord(-3, -3, 0)  # a floor corner
print("corner neighbors:", [n.as_tuple() for n in neighbors(a, w)])
print("corner legality mask:", legal_moves(a, w))

# BFS paths are Manhattan-optimal; with no obstacles they sweep x, then y, then z
b = LatticeCoord(2, 1, 3)
path = oracle_path(a, b, w)
print("path", a.as_tuple(), "->", b.as_tuple(), "length", len(path))
for pt in path.points:
    print("  ", pt.as_tuple())
assert len(path) - 1 == manhattan(a, b)

# drop an obstacle on that route and the plan bends around it
bad = LatticeCoord(0, -3, 0)
assert bad in path.points
detour = oracle_path(a, b, w.with_obstacles(frozenset({bad})))
print("blocked cell avoided:", bad not in detour.points,
      "| still optimal:", len(detour) - 1 == manhattan(a, b))
