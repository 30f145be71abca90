"""Regenerate the van der Pol periodic-orbit polygon shipped as package data.

The orbit is the unstable periodic orbit of the time-reversed van der Pol
system used in the examples, i.e. the attracting limit cycle of the flow
with the sign of time flipped.  We integrate that flow until transients die
out, cut one period at the section y = 0 (crossing upwards) and sample the
closed curve with 400 vertices.

The shipped polygon is offset inward by MARGIN: the contraction metric
diverges on the orbit itself, so collocation points placed too close to it
poison the recovery everywhere.  One grid spacing of the reference
configuration keeps the interior clean.
"""

from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from shapely.geometry import Polygon

MARGIN = 0.15


def reversed_flow(_t, u):
    x, y = u
    return [y, -x + 3.0 * (1.0 - x * x) * y]


def main() -> None:
    settle = solve_ivp(reversed_flow, [0.0, 200.0], [2.0, 0.0],
                       rtol=1e-10, atol=1e-12, max_step=0.01)
    section = lambda _t, u: u[1]
    section.direction = 1
    sol = solve_ivp(reversed_flow, [0.0, 20.0], settle.y[:, -1],
                    rtol=1e-12, atol=1e-14, max_step=0.005,
                    events=section, dense_output=True)
    t0, t1 = sol.t_events[0][:2]
    ts = np.linspace(t0, t1, 2001)[:-1]
    orbit = Polygon(sol.sol(ts).T)
    inner = orbit.buffer(-MARGIN).exterior
    frac = np.linspace(0.0, 1.0, 401)[:-1]
    pts = np.array([inner.interpolate(s, normalized=True).coords[0]
                    for s in frac])
    out = Path(__file__).resolve().parents[1] / "src" / "conmet" / "data" / "vanderpol_orbit.csv"
    with open(out, "w") as fh:
        fh.write("x,y\n")
        for x, y in pts:
            fh.write("%.17g,%.17g\n" % (x, y))
    print(f"wrote {len(pts)} vertices to {out}")


if __name__ == "__main__":
    main()
