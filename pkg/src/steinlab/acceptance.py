"""The ten acceptance criteria, each as a function returning a :class:`CriterionResult`.

``budget="full"`` runs every criterion at its stated size. ``budget="quick"``
shrinks the two Monte Carlo experiments (criteria 8 and 10) so the whole
suite finishes in well under a minute; the exact criteria are unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import curie_weiss as cw
from . import ergm
from . import exact_oracle as eo
from . import ising_lattice as il
from . import meanfield as mf
from .rng import make_rng
from .stein_core import EXACT_TOL, PsiBoundSpec, pointwise_dominance_check


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    runtime: float
    limit: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.runtime:.2f}s / {self.limit:g}s)"


def _finish(number, title, ok, start, limit, details) -> CriterionResult:
    runtime = time.perf_counter() - start
    details["within_runtime"] = runtime < limit
    return CriterionResult(number, title, bool(ok and runtime < limit), runtime, limit, details)


# ---------------------------------------------------------------- 1


def _theta_displays(d: int, b: float) -> list[float]:
    t = math.tanh
    if d == 2:
        return [0.5 * (t(4 * b) + 2 * t(2 * b)), 0.5 * (t(4 * b) - 2 * t(2 * b))]
    if d == 3:
        return [3 / 16 * (t(6 * b) + 4 * t(4 * b) + 5 * t(2 * b)),
                10 / 16 * (t(6 * b) - 3 * t(2 * b)),
                3 / 16 * (t(6 * b) - 4 * t(4 * b) + 5 * t(2 * b))]
    if d == 4:
        return [1 / 16 * (t(8 * b) + 6 * t(6 * b) + 14 * t(4 * b) + 14 * t(2 * b)),
                7 / 16 * (t(8 * b) + 2 * t(6 * b) - 2 * t(4 * b) - 6 * t(2 * b)),
                7 / 16 * (t(8 * b) - 2 * t(6 * b) - 2 * t(4 * b) + 6 * t(2 * b)),
                1 / 16 * (t(8 * b) - 6 * t(6 * b) + 14 * t(4 * b) - 14 * t(2 * b))]
    raise ValueError(d)


def criterion_1(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    worst = 0.0
    worst_closed0 = 0.0
    for d in (2, 3, 4):
        for b in (0.1, 0.44, 1.0, 2.0):
            il._theta_cached.cache_clear()
            table = il.theta_coefficients(d, b)
            for k, val in enumerate(_theta_displays(d, b)):
                worst = max(worst, abs(table.theta[k] - val))
            worst_closed0 = max(worst_closed0, abs(table.theta[0] - il.theta0_closed_form(d, b)))
    ok = worst < 1e-12 and worst_closed0 < 1e-12
    return _finish(1, "theta coefficients equal the closed-form displays", ok, start, 1.0,
                   {"max_display_error": worst, "max_theta0_error": worst_closed0})


# ---------------------------------------------------------------- 2


def criterion_2(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    errs = {(d, b): il.fourier_walsh_identity_check(d, b) for d in (1, 2, 3, 4) for b in (0.2, 0.44, 1.0)}
    worst = max(errs.values())
    return _finish(2, "Fourier-Walsh identity", worst < 1e-12, start, 1.0, {"max_error": worst})


# ---------------------------------------------------------------- 3


def criterion_3(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    laws = {
        "cw n=3": eo.cw_pair_law(3, 1.0, 0.0),
        "ising d=1 n=3": eo.ising_pair_law(1, 3, 0.44, 0.2),
        "ising d=2 n=3": eo.ising_pair_law(2, 3, 0.44, 0.2),
        "ergm n=3": eo.ergm_pair_law(3, 1.0, 0.0),
        "ergm n=4 two-star": eo.general_ergm_pair_law(4, ergm.SubgraphSpec.two_star(), 1.0, 0.0),
    }
    details = {}
    ok = True
    for name, law in laws.items():
        db = law.detailed_balance
        mean = abs(law.mean_f())
        details[name] = {"detailed_balance": db, "mean_f": mean}
        ok &= db < EXACT_TOL and mean < EXACT_TOL
    return _finish(3, "detailed balance and E f = 0 by exact enumeration", ok, start, 10.0, details)


# ---------------------------------------------------------------- 4


def criterion_4(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    details = {}
    ok = True
    for n in (50, 500):
        samples = cw.sample_pairs(n, 1.0, 0.0, 10_000, rng=make_rng(4, n))
        spec = PsiBoundSpec("power", B=6 / n, C=12 * n ** (-5 / 3), alpha=2 / 3, c=2.0)
        rep = pointwise_dominance_check(samples, spec, tol=EXACT_TOL)
        details[f"n={n}"] = {"checked": rep.checked, "violations": rep.violations, "max_excess": rep.max_excess}
        ok &= rep.violations == 0 and rep.checked >= 10_000
    x = np.linspace(-1, 1, 10_000)
    grid_viol = int(np.sum(np.abs(x) ** 3 > 5 * np.abs(x - np.tanh(x)) + EXACT_TOL))
    details["cubic_grid_violations"] = grid_viol
    ok &= grid_viol == 0
    return _finish(4, "pointwise Delta dominance for Curie-Weiss at beta = 1", ok, start, 30.0, details)


# ---------------------------------------------------------------- 5


def criterion_5(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    ns = (10**3, 10**4, 10**5)
    means = [eo.cw_mean_abs_m(n) for n in ns]
    target = 10 ** (-0.25)
    ratios = [means[k + 1] / means[k] for k in range(2)]
    ratio_ok = all(abs(r / target - 1) <= 0.10 for r in ratios)
    t_grid = np.linspace(0.5, 3.0, 26)
    fits = {}
    tail_ok = True
    for n in ns:
        exp = cw.critical_tail_exact(n, t_grid)
        c = exp.fitted_c
        fits[n] = c
        tail_ok &= c > 0 and bool(np.all(exp.empirical_prob <= 2 * np.exp(-c * t_grid**4) + 1e-15))
    return _finish(5, "critical n^(-1/4) scaling and quartic tail", ratio_ok and tail_ok, start, 60.0,
                   {"mean_abs_m": means, "ratios": ratios, "target": target, "fitted_c": fits})


# ---------------------------------------------------------------- 6


def criterion_6(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    ns = (4, 5, 6, 7)
    details = {}
    ok = True
    for beta, h in ((1.0, 0.0), (3.0, -1.0), (2.0, -0.5)):
        lim = mf.free_energy_limit(beta, h)
        errs = [abs(eo.enumerate_ergm(n, beta, h).log_Z / n**2 - lim) for n in ns]
        rises = sum(b > a for a, b in zip(errs, errs[1:]))
        K = max(e * math.sqrt(n) for e, n in zip(errs, ns))
        details[f"({beta}, {h})"] = {"limit": lim, "errors": errs, "increases": rises, "fitted_K": K,
                                    "in_S": mf.region_S_membership(beta, h).in_S}
        ok &= rises <= 1 and all(e <= K * n**-0.5 + 1e-15 for e, n in zip(errs, ns))
    beta0 = max(abs(mf.free_energy_limit(0.0, h) - 0.5 * math.log1p(math.exp(h))) for h in (-2, -1, 0, 1, 2))
    details["beta0_error"] = beta0
    ok &= beta0 < 1e-12
    return _finish(6, "free energy convergence", ok, start, 300.0, details)


# ---------------------------------------------------------------- 7


def criterion_7(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    p, r = 0.35, 0.6
    rate = mf.kl_rate(r, p)
    ratios = {}
    for n in (5, 6, 7):
        lp = eo.log_triangle_tail(n, p, math.comb(n, 3) * r**3)
        ratios[n] = -2 * lp / n**2 / rate
    vals = list(ratios.values())
    in_band = all(0.5 <= v <= 2.0 for v in vals)
    toward_one = all(abs(b - 1) < abs(a - 1) for a, b in zip(vals, vals[1:]))
    return _finish(7, "triangle large deviations (directional)", in_band and toward_one, start, 300.0,
                   {"ratios": ratios, "in_band": in_band, "toward_one": toward_one, "I(r,p)": rate})


# ---------------------------------------------------------------- 8


def criterion_8(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    sizes = {"full": ((100, 100), (400, 20)), "quick": ((100, 20), (400, 4))}[budget]
    runs = {}
    for n, samples in sizes:
        runs[n] = ergm.residual_scaling_run(n, 1.0, 0.0, samples, burnin_sweeps=10, thin_sweeps=1,
                                            rng=make_rng(8, n), probes_per_sample=50)
    ratio = runs[100].mean_abs_g / runs[400].mean_abs_g
    violations = sum(r.pair_violations for r in runs.values())
    checks = sum(r.pair_checks for r in runs.values())
    ok = 1.2 <= ratio <= 1.8 and violations == 0
    details = {"ratio": ratio, "pair_checks": checks, "pair_violations": violations,
               "mean_abs_g": {n: r.mean_abs_g for n, r in runs.items()},
               "std_err": {n: r.std_err for n, r in runs.items()}}
    return _finish(8, "mean-field residual scaling n=100 vs n=400", ok, start, 300.0, details)


# ---------------------------------------------------------------- 9


def criterion_9(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    disagree = boundary = low_beta_out = 0
    for h in np.linspace(-4.0, 1.0, 200):
        for beta in np.linspace(0.0, 15.0, 200):
            rep = mf.region_S_membership(float(beta), float(h))
            if rep.boundary:
                boundary += 1
                continue
            disagree += rep.closed_form != rep.numeric
            if beta <= 1.5**3 and not (rep.closed_form and rep.numeric):
                low_beta_out += 1
    crit = mf.psi_roots(3.375, math.log(2) - 1.5)
    triple = (len(crit.roots) == 1 and crit.roots[0].multiplicity == "triple"
              and abs(crit.roots[0].u - 4 / 9) < 1e-6)
    p0 = mf.p0()
    p0_ok = round(p0, 2) == 0.31 and abs(p0 - 2 / (2 + math.exp(1.5))) < 1e-15
    ok = disagree == 0 and low_beta_out == 0 and triple and p0_ok
    return _finish(9, "region S classification and critical point", ok, start, 30.0,
                   {"disagreements": disagree, "boundary_points": boundary, "low_beta_outside_S": low_beta_out,
                    "critical_roots": [(r.u, r.multiplicity) for r in crit.roots], "p0": p0})


# ---------------------------------------------------------------- 10


def criterion_10(budget: str = "full") -> CriterionResult:
    start = time.perf_counter()
    samples = {"full": 10_000, "quick": 2_000}[budget]
    t_grid = np.arange(0.0, 4.01, 0.25)
    details = {}
    ok = True
    for beta in (0.2, 0.44, 0.8):
        res = il.residual_tail_experiment(2, 16, beta, 0.0, samples, None, None, t_grid, make_rng(10, int(beta * 100)))
        slack = res.bound_prob + 3 * res.std_err - res.empirical_prob
        details[beta] = {"b": res.b, "min_slack": float(slack.min()), "samples": samples}
        ok &= bool(np.all(slack >= 0))
    return _finish(10, "Ising residual tail d=2 n=16", ok, start, 300.0, details)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9, criterion_10)


def run_all(budget: str = "full", only=None) -> list[CriterionResult]:
    if budget not in ("full", "quick"):
        raise ValueError("budget must be 'full' or 'quick'")
    out = []
    for k, fn in enumerate(CRITERIA, start=1):
        if only and k not in only:
            continue
        out.append(fn(budget))
    return out
