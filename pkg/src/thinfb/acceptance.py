"""
Acceptance checks shared by ``thinfb verify`` and the test suite.

Each check returns a :class:`CriterionResult` with the measured values, the
bound it is held to and a pass flag. Results contain no timings, so two runs
produce identical records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (dichotomy_sequence, flatness_eps, improvement_of_flatness_run,
                       nondegeneracy_scan, subsolution_certificate)
from .energy import LAMBDA_DEFAULT, almost_min_defect, energy, rescaled_dirichlet_avg, weiss
from .exact import ProfileParams, U_field, eval_V, gamma_V, hodograph
from .generators import boundary_field, coefficient_field
from .grid import Ball, SlitMask, build_grid
from .solve import (SolverSettings, generate_almost_minimizer, harmonic_replacement,
                    linearized_solve, minimize_energy)


@dataclass
class CriterionResult:
    id: int
    name: str
    suite: str
    passed: bool
    measured: dict = field(default_factory=dict)
    bound: str = ""

    def to_json(self) -> dict:
        return {"id": self.id, "name": self.name, "suite": self.suite, "passed": self.passed,
                "measured": self.measured, "bound": self.bound}

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.id:>2} {self.name}"


def _slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# ---------------------------------------------------------------------------


def c1_cone_energy(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    hs = [1 / 64, 1 / 128, 1 / 256]
    totals = [energy(U_field(build_grid(1, h)), Ball(1.0), lam).total for h in hs]
    errs = [abs(t - math.pi) for t in totals]
    order = _slope(hs, errs) if min(errs) > 0 else math.inf
    ok_val = math.pi * 0.98 <= totals[-1] <= math.pi * 1.02
    return CriterionResult(1, "energy of the trivial cone", "energy", bool(ok_val and order >= 0.8),
                           {"h": hs, "total": totals, "abs_error": errs, "order": order},
                           "total in [0.98 pi, 1.02 pi] at h=1/256; observed order >= 0.8")


def c2_global_min_defect(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    hs = [1 / 64, 1 / 128, 1 / 256]
    defects = [almost_min_defect(U_field(build_grid(1, h)), Ball(0.5), lam) for h in hs]
    dec = all(b < a for a, b in zip(defects, defects[1:]))
    return CriterionResult(2, "global-minimizer defect of U", "energy",
                           bool(defects[-1] <= 0.02 and dec),
                           {"h": hs, "defect": defects, "decreasing": dec},
                           "defect <= 0.02 at h=1/256, strictly decreasing in h")


def c3_weiss(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    h = 1 / 256
    g = build_grid(1, h)
    U = U_field(g)
    radii = [1 / 8, 1 / 4, 1 / 2]
    W = [weiss(U, r, lam) for r in radii]
    spread = (max(W) - min(W)) / abs(W[2]) if W[2] else math.inf
    rel = [abs(w - math.pi / 2) / (math.pi / 2) for w in W]
    mono = {}
    mono_ok = True
    r_mono = [1 / 8, 1 / 4, 1 / 2, 3 / 4]
    for label, gen, params in (("U-trace", "U-trace", {}), ("bent", "tilted-U", {"bend": 0.02})):
        u, _ = minimize_energy(boundary_field(g, gen, params), lam)
        wr = [weiss(u, r, lam) for r in r_mono]
        steps = [b - a for a, b in zip(wr, wr[1:])]
        mono[label] = {"radii": r_mono, "W": wr, "min_step": min(steps)}
        mono_ok &= min(steps) >= -1e-3
    ok = spread <= 0.02 and max(rel) <= 0.05 and mono_ok
    return CriterionResult(3, "Weiss homogeneity and monotonicity", "energy", bool(ok),
                           {"radii": radii, "W": W, "spread_rel": spread,
                            "rel_error_vs_pi_over_2": rel, "minimizers": mono},
                           "spread <= 0.02 W(1/2); |W - pi/2| <= 5%; steps >= -1e-3")


def c4_dichotomy(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    g = build_grid(1, 1 / 1024)
    tr = dichotomy_sequence(U_field(g), eta=0.25, depth=3, M_hat=1.0)
    target = math.sqrt(2) / 2
    dev = max(abs(a - target) / target for a in tr.a)
    first = all(x == "first" for x in tr.alternative)
    gl = build_grid(1, 1 / 256)
    lin = boundary_field(gl, "affine", {"slope": [16.0]})
    tl = dichotomy_sequence(lin, eta=0.25, depth=2, M_hat=1.0)
    halving = [b / a for a, b in zip(tl.a, tl.a[1:])]
    halve_ok = all(abs(q - 0.5) <= 0.05 * 0.5 for q in halving)
    second = all(x == "second" for x in tl.alternative)
    ok = dev <= 0.03 and first and tr.ok and halve_ok and second and tl.ok
    return CriterionResult(4, "dichotomy on U and on a steep linear field", "energy", bool(ok),
                           {"U": {"a": tr.a, "max_rel_dev": dev, "labels": tr.alternative},
                            "linear": {"a": tl.a, "ratios": halving, "labels": tl.alternative}},
                           "U: a within 3% of sqrt(2)/2, first alternative; linear: ratio 1/2 +- 5%")


def _hodograph_gap(grid, p) -> float:
    reg = Ball(1.0).node_mask(grid) & (grid.dist_to_L >= 10 * grid.h)
    H = hodograph(lambda q: eval_V(q, p), 1.0, reg, grid=grid)
    d = H.defined & ~H.multivalued
    return float(np.abs(H.value[d] - gamma_V(H.points()[d], p)).max())


def c5_hodograph(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    mus = [0.1, 0.05, 0.025]
    g = build_grid(1, 1 / 256)
    gaps = [_hodograph_gap(g, ProfileParams(1, a=mu, mu=mu)) for mu in mus]
    slope = _slope(mus, gaps)
    g2 = build_grid(2, 1 / 32)
    gaps2 = [_hodograph_gap(g2, ProfileParams(2, a=mu, M=[[mu]], xi=[mu], mu=mu)) for mu in mus]
    slope2 = _slope(mus, gaps2)
    ok = abs(slope - 2.0) <= 0.3 and abs(slope2 - 2.0) <= 0.3
    return CriterionResult(5, "hodograph of V against gamma_V", "exact", bool(ok),
                           {"mu": mus, "n1_gap": gaps, "n1_slope": slope,
                            "n2_gap": gaps2, "n2_slope": slope2, "C1_n1": gaps[0] / mus[0] ** 2},
                           "log-log slope in mu within 2.0 +- 0.3")


def c6_subsolution(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    h = 1 / 128
    g = build_grid(1, h, 2.0)
    sub = subsolution_certificate(ProfileParams(1, a=0.1, mu=0.1), g)
    sup = subsolution_certificate(ProfileParams(1, a=-0.1, mu=0.1), g)
    ok = sub.passes and not sup.passes
    return CriterionResult(6, "subsolution certificate and sign flip", "analysis", bool(ok),
                           {"margin_a_pos": sub.margin, "margin_a_neg": sup.margin,
                            "bound": -5 * h, "expansion": sub.expansion},
                           "margin >= -5h for a=mu=0.1; fails for a=-0.1")


def _almost_min_family(h: float, lam: float) -> list:
    g = build_grid(1, h)
    data = boundary_field(g, "U-trace")
    fam = [("one", 0.0), ("radial", 0.05), ("radial", 0.1), ("sine", 0.05), ("sine", 0.1)]
    out = []
    for name, kappa in fam:
        u = generate_almost_minimizer(coefficient_field(g, name, kappa, 1.0), data, lam)
        out.append((f"{name}-{kappa}", u))
    bent = boundary_field(g, "tilted-U", {"bend": 0.02})
    out.append(("bent-radial-0.1",
                generate_almost_minimizer(coefficient_field(g, "radial", 0.1), bent, lam)))
    return out


def c7_nondegeneracy(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    h = 1 / 128
    g = build_grid(1, h)
    radii = [1 / 16, 1 / 8, 1 / 4, 1 / 2]
    U = U_field(g)
    ratios = [nondegeneracy_scan(U, SlitMask.halfspace(g), [r], points=[[0.0, 0.0]])
              for r in radii]
    u_ok = all(abs(q - 1) <= h for q in ratios)
    fam = {}
    for label, u in _almost_min_family(h, lam):
        fam[label] = nondegeneracy_scan(u, SlitMask.from_field(u), radii, region=Ball(0.5))
    floor = min(fam.values())
    ok = u_ok and floor >= 0.3 and len(fam) >= 5
    return CriterionResult(7, "nondegeneracy", "analysis", bool(ok),
                           {"U_ratios": ratios, "family": fam, "family_floor": floor},
                           "U ratio 1 +- h; family floor >= 0.3")


def c8_replacement(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    g = build_grid(1, 1 / 128)
    data = boundary_field(g, "affine", {"c": 1.0, "slope": [0.5]})
    kappas = [0.2, 0.1, 0.05]
    dist, positive = [], []
    half = Ball(0.5).node_mask(g)
    for k in kappas:
        u = generate_almost_minimizer(coefficient_field(g, "radial", k), data, lam)
        slit_in_ball = Ball(1.0).node_mask(g)[..., g.mid]
        positive.append(bool(np.all(u.slit[slit_in_ball] > 0)))
        v = harmonic_replacement(u, Ball(1.0))
        dist.append(float(np.abs(u.values - v.values)[half].max()))
    mono = all(b <= a for a, b in zip(dist, dist[1:]))
    ok = mono and dist[-1] <= 0.1 and all(positive)
    return CriterionResult(8, "harmonic replacement of almost minimizers", "solve", bool(ok),
                           {"kappa": kappas, "sup_diff_half_ball": dist, "positive_on_B1": positive},
                           "nonincreasing as kappa decreases; <= 0.1 at kappa=0.05")


def c9_flatness(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    h = 1 / 512
    g = build_grid(1, h)
    trans = {}
    for b in (0.05, 0.1):
        e = flatness_eps(U_field(g, b), Ball(1.0 - b))
        trans[str(b)] = {"eps": e, "error": abs(e - b)}
    trans_ok = all(v["error"] <= h for v in trans.values())
    data = boundary_field(g, "tilted-U", {"bend": 0.02})
    u, _ = minimize_energy(data, lam)
    rep = improvement_of_flatness_run(u, eta=0.5, depth=3)
    rat = rep.ratios
    dec = len(rat) == 4 and all(b < a for a, b in zip(rat, rat[1:]))
    ok = trans_ok and dec and not rep.truncated and rep.alpha_hat is not None and rep.alpha_hat > 0
    return CriterionResult(9, "flatness trapping and improvement", "analysis", bool(ok),
                           {"translates": trans, "run": rep.to_json()},
                           "|eps(U_b) - b| <= h; eps_k/r_k strictly decreasing over 3 dyadic "
                           "scales; alpha_hat > 0")


def c10_linearized(lam: float = LAMBDA_DEFAULT) -> CriterionResult:
    g1 = build_grid(1, 1 / 64)
    const = linearized_solve(boundary_field(g1, "constant", {"c": 0.7}))
    c_err = float(np.abs(const.values - 0.7).max())
    g2 = build_grid(2, 1 / 32)
    data = boundary_field(g2, "affine", {"slope": [1.0, 0.0]})
    H = linearized_solve(data)
    far = g2.dist_to_L >= 4 * g2.h
    lin_err = float(np.abs(H.values - data.values)[far].max())
    f = boundary_field(g1, "U-trace")
    k = boundary_field(g1, "affine", {"c": 0.3, "slope": [1.0]})
    Lf, Lk = linearized_solve(f), linearized_solve(k)
    comb = f.scaled(2.0) + k.scaled(-0.5)
    Lc = linearized_solve(comb)
    linearity = float(np.abs(Lc.values - (2.0 * Lf.values - 0.5 * Lk.values)).max())
    mp = True
    for data_f, sol in ((f, Lf), (k, Lk), (comb, Lc)):
        b = data_f.values[data_f.grid.on_box_boundary]
        mp &= bool(sol.values.min() >= b.min() and sol.values.max() <= b.max())
    ok = c_err <= 1e-8 and lin_err <= 5 * g2.h and linearity <= 1e-10 and mp
    return CriterionResult(10, "linearized solver", "solve", bool(ok),
                           {"constant_err": c_err, "n2_linear_err": lin_err,
                            "linearity_err": linearity, "max_principle": mp},
                           "constant 1e-8; linear x_1 within 5h; linearity 1e-10; max principle")


CRITERIA = {1: c1_cone_energy, 2: c2_global_min_defect, 3: c3_weiss, 4: c4_dichotomy,
            5: c5_hodograph, 6: c6_subsolution, 7: c7_nondegeneracy, 8: c8_replacement,
            9: c9_flatness, 10: c10_linearized}
SUITES = {"exact": [5], "energy": [1, 2, 3, 4], "solve": [8, 10], "analysis": [6, 7, 9],
          "all": list(range(1, 11))}


def run_suite(name: str, lam: float = LAMBDA_DEFAULT, callback=None) -> list:
    if name not in SUITES:
        raise KeyError(name)
    out = []
    for cid in SUITES[name]:
        res = CRITERIA[cid](lam)
        if callback:
            callback(res)
        out.append(res)
    return out
