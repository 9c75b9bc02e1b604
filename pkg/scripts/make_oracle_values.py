"""Regenerate the frozen oracle constants used by the test suite.

Run from the repository root:

    PYTHONPATH=src python3 scripts/make_oracle_values.py

Each value is computed by an independent route from the production path it
later checks:

* annulus profile extrema: Richardson extrapolation over fine Chebyshev
  collocation grids, cross-checked against scipy.integrate.solve_bvp
  (a separate adaptive-collocation implementation);
* ellipsoid point distance: dense boundary sampling with local golden-section
  refinement, no nearest-point projection involved.
"""

import numpy as np
from scipy.integrate import solve_bvp
from scipy.optimize import minimize

from ylab import radial


def parabola_max(r, v):
    k = int(np.argmax(v))
    sl = slice(max(k - 1, 0), k + 2)
    c = np.polyfit(r[sl], v[sl], 2)
    rstar = -c[1] / (2 * c[0])
    return float(np.polyval(c, rstar)), float(rstar)


def richardson_pair(f, n1, n2):
    a, b = f(n1), f(n2)
    ratio = (n2 / n1) ** 2
    return b + (np.asarray(b) - np.asarray(a)) / (ratio - 1.0)


def annulus_vmax(num):
    s = radial.solve_annulus(3, 0.5, 2.0, num_nodes=num)
    return parabola_max(s.r, s.v)[0]


def annulus_max_ric(num, r0, R):
    s = radial.solve_annulus(3, r0, R, num_nodes=num)
    c = radial.curvature_radial(s)
    mr = np.maximum(c.Ric_rad, c.Ric_tan)
    return parabola_max(s.r, mr)[0]


def bvp_cross_check(r0, R, n=3.0):
    eps = (R - r0) * 1e-6
    H_in, H_out = -(n - 1) / r0, (n - 1) / R
    va = eps - H_in * eps**2 / (2 * (n - 1))
    vb = eps - H_out * eps**2 / (2 * (n - 1))

    def ode(r, y):
        v, vp = y
        return np.vstack([vp, (n / 2) * (vp**2 - 1) / v - (n - 1) * vp / r])

    def bc(ya, yb):
        return np.array([ya[0] - va, yb[0] - vb])

    t = np.linspace(0, 1, 2001)
    r = (r0 + eps) + (R - r0 - 2 * eps) * 0.5 * (1 - np.cos(np.pi * t))
    y0 = np.vstack([np.minimum(r - r0, R - r) + eps,
                    np.where(r < 0.5 * (r0 + R), 1.0, -1.0)])
    sol = None
    for tol in (1e-6, 1e-8, 1e-9):
        sol = solve_bvp(ode, bc, r, y0, tol=tol, max_nodes=1_500_000)
        assert sol.status == 0, sol.message
        r, y0 = sol.x, sol.y
    return parabola_max(sol.x, sol.y[0])[0]


def ellipsoid_distance_bruteforce(axes, point):
    a = np.asarray(axes, float)
    p = np.asarray(point, float)
    th = np.linspace(0, np.pi, 2001)
    ph = np.linspace(0, 2 * np.pi, 4001)
    T, P = np.meshgrid(th, ph, indexing="ij")
    surf = np.stack([a[0] * np.sin(T) * np.cos(P),
                     a[1] * np.sin(T) * np.sin(P),
                     a[2] * np.cos(T)], axis=-1)
    d2 = ((surf - p) ** 2).sum(axis=-1)
    k = np.unravel_index(np.argmin(d2), d2.shape)
    x0 = np.array([T[k], P[k]])

    def obj(ang):
        t, q = ang
        s = np.array([a[0] * np.sin(t) * np.cos(q),
                      a[1] * np.sin(t) * np.sin(q),
                      a[2] * np.cos(t)])
        return ((s - p) ** 2).sum()

    res = minimize(obj, x0, method="Nelder-Mead",
                   options={"xatol": 1e-14, "fatol": 1e-28, "maxiter": 20000})
    inside = ((p / a) ** 2).sum() < 1
    return float(np.sqrt(res.fun)) * (1.0 if inside else -1.0)


def main():
    vmax = richardson_pair(annulus_vmax, 60000, 120000)
    bvp = bvp_cross_check(0.5, 2.0)
    print(f"ANNULUS_05_2_VMAX = {vmax:.12f}   (solve_bvp cross-check {bvp:.12f},"
          f" delta {abs(vmax - bvp):.2e})")

    mr = richardson_pair(lambda n: annulus_max_ric(n, 0.5, 2.0), 60000, 120000)
    print(f"ANNULUS_05_2_MAX_RIC = {mr:.12f}")

    mr_thin = richardson_pair(lambda n: annulus_max_ric(n, 0.05, 4.0), 60000, 120000)
    print(f"ANNULUS_005_4_MAX_RIC = {mr_thin:.12f}")

    d = ellipsoid_distance_bruteforce([1.0, 1.5, 2.0], [0.9, 0.0, 0.0])
    print(f"ELLIPSOID_D_AT_09 = {d:.12f}")
    d2 = ellipsoid_distance_bruteforce([1.0, 1.5, 2.0], [0.0, 0.0, 0.1])
    print(f"ELLIPSOID_D_AT_Z01 = {d2:.12f}")
    d3 = ellipsoid_distance_bruteforce([1.0, 1.5, 2.0], [0.3, -0.4, 0.5])
    print(f"ELLIPSOID_D_GENERIC = {d3:.12f}")


if __name__ == "__main__":
    main()
