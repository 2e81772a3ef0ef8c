"""Design evaluation and search over mirror counts, substrate and diameter.

evaluate_design composes the planar solver, the pillar mode solver and the
calibrated emitter model into one deterministic figure-of-merit function;
sweep and optimize drive it over grids and bounds.  Planar solutions are
cached per mirror configuration, so diameter sweeps only pay for the mode
solver.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import emitter, layered, pillar
from .errors import GridCapExceededError, InvalidParameterError, NumericalFailureError

DIAMETER_BOUNDS_UM = (0.5, 5.0)
PAIR_COUNT_BOUNDS = (1, 40)
PAIR_SPLITTING_NM = 2.4
DEFAULT_GRID_CAP = 100_000


@dataclass(frozen=True)
class DesignPoint:
    diameter_um: float
    n_top_pairs: int
    n_bottom_pairs: int
    substrate: layered.OpticalMaterial = layered.GAAS
    lam0_nm: float = 910.0

    def __post_init__(self):
        lo, hi = DIAMETER_BOUNDS_UM
        if not lo <= self.diameter_um <= hi:
            raise InvalidParameterError(f"diameter must be within [{lo}, {hi}] um")
        plo, phi = PAIR_COUNT_BOUNDS
        for name in ("n_top_pairs", "n_bottom_pairs"):
            v = getattr(self, name)
            if not (isinstance(v, (int, np.integer)) and plo <= v <= phi):
                raise InvalidParameterError(f"{name} must be an integer in [{plo}, {phi}]")


@dataclass(frozen=True)
class DesignEvaluation:
    eta_int: float
    quality_factor: float
    linewidth_nm: float
    beta: float
    eta_top: float
    purcell: float
    resonance_nm: float
    pair_compatible: bool


@lru_cache(maxsize=256)
def _planar_bundle(lam0_nm: float, n_top: int, n_bot: int, substrate: layered.OpticalMaterial):
    stack = layered.build_quarter_wave_cavity(
        lam0_nm, n_top, n_bot, substrate=substrate
    )
    planar = layered.find_resonance(stack, lam0_nm - 25.0, lam0_nm + 25.0)
    profile = layered.field_profile(stack, planar.resonance_wavelength_nm)
    return stack, planar, profile.effective_length_nm


@lru_cache(maxsize=4096)
def _modes_cached(diameter_um: float, lam_nm: float, n_core: float, n_clad: float):
    geo = pillar.PillarGeometry(diameter_um, n_core, n_clad)
    return tuple(pillar.solve_guided_modes(geo, lam_nm, l_max=0))


def evaluate_design(
    point: DesignPoint,
    model: emitter.LeakyModel | None = None,
    n_core: float = 3.53,
    n_clad: float = 1.0,
    splitting_nm: float = PAIR_SPLITTING_NM,
) -> DesignEvaluation:
    """Deterministic composition from stack to internal efficiency.

    The emitter sits at the fundamental pillar resonance; pair_compatible
    flags whether the linewidth exceeds the cascade splitting.
    """
    if model is None:
        model = emitter.default_leaky_model()
    _, planar, l_eff_nm = _planar_bundle(
        point.lam0_nm, point.n_top_pairs, point.n_bottom_pairs, point.substrate
    )
    modes = list(
        _modes_cached(point.diameter_um, planar.resonance_wavelength_nm, n_core, n_clad)
    )
    geo = pillar.PillarGeometry(point.diameter_um, n_core, n_clad)
    fund = pillar.fundamental_mode(modes)
    lam_res = pillar.pillar_resonance_shift(planar.resonance_wavelength_nm, fund, geo)
    w0 = fund.mode_field_radius_um
    v_eff = (np.pi * w0**2 / 2) * (l_eff_nm / 1000.0)
    f_p = emitter.purcell_peak(
        planar.quality_factor, v_eff, planar.resonance_wavelength_nm, n_core
    )
    f_leaky = emitter.leaky_rate(geo, lam_res, model, modes)
    beta = f_p / (f_p + f_leaky)
    eta_int = beta * planar.top_escape_fraction
    return DesignEvaluation(
        eta_int=float(eta_int),
        quality_factor=planar.quality_factor,
        linewidth_nm=planar.linewidth_nm,
        beta=float(beta),
        eta_top=planar.top_escape_fraction,
        purcell=float(f_p),
        resonance_nm=float(lam_res),
        pair_compatible=bool(planar.linewidth_nm > splitting_nm),
    )


SWEEPABLE_FIELDS = ("diameter_um", "n_top_pairs", "n_bottom_pairs", "substrate", "lam0_nm")


@dataclass(frozen=True)
class SweepTable:
    fields: tuple
    points: tuple
    evaluations: tuple

    def column(self, name: str):
        if name in SWEEPABLE_FIELDS:
            return np.array([getattr(p, name) for p in self.points])
        return np.array([getattr(e, name) for e in self.evaluations])


def _eval_chunk(args):
    points, model = args
    return [evaluate_design(p, model) for p in points]


def sweep(
    grid: dict,
    model: emitter.LeakyModel | None = None,
    base: DesignPoint | None = None,
    cap: int = DEFAULT_GRID_CAP,
    jobs: int = 1,
    progress=None,
) -> SweepTable:
    """Evaluate the cartesian product of per-field value lists.

    grid maps any subset of DesignPoint fields to value sequences; missing
    fields come from ``base``.  The table is ordered by the fixed field
    order and reproducible across runs and worker counts.
    """
    unknown = set(grid) - set(SWEEPABLE_FIELDS)
    if unknown:
        raise InvalidParameterError(f"cannot sweep {sorted(unknown)}")
    if not grid:
        return SweepTable(fields=(), points=(), evaluations=())
    base = base or DesignPoint(2.02, 5, 18)
    axes = []
    swept = []
    for name in SWEEPABLE_FIELDS:
        if name in grid:
            values = list(grid[name])
            swept.append(name)
        else:
            values = [getattr(base, name)]
        axes.append(values)
    n_rows = int(np.prod([len(a) for a in axes]))
    if n_rows > cap:
        raise GridCapExceededError(
            f"grid has {n_rows} points, cap is {cap}; coarsen the axes "
            f"(e.g. {int(np.ceil(n_rows / cap))}x fewer steps)"
        )
    if model is None:
        model = emitter.default_leaky_model()

    points = []
    for combo in itertools.product(*axes):
        kw = dict(zip(SWEEPABLE_FIELDS, combo))
        kw["diameter_um"] = float(kw["diameter_um"])
        kw["n_top_pairs"] = int(kw["n_top_pairs"])
        kw["n_bottom_pairs"] = int(kw["n_bottom_pairs"])
        kw["lam0_nm"] = float(kw["lam0_nm"])
        points.append(DesignPoint(**kw))

    chunk = max(1, min(256, (len(points) + max(jobs, 1) - 1) // max(jobs, 1)))
    chunks = [points[i : i + chunk] for i in range(0, len(points), chunk)]
    evaluations: list[DesignEvaluation] = []
    if jobs > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for k, result in enumerate(pool.map(_eval_chunk, [(c, model) for c in chunks])):
                evaluations.extend(result)
                if progress:
                    progress(k + 1, len(chunks))
    else:
        for k, c in enumerate(chunks):
            evaluations.extend(_eval_chunk((c, model)))
            if progress:
                progress(k + 1, len(chunks))
    return SweepTable(fields=tuple(swept), points=tuple(points), evaluations=tuple(evaluations))


OBJECTIVES = ("eta_int", "eta_int_pair_compatible")


@dataclass(frozen=True)
class OptimizeResult:
    best_point: DesignPoint
    best_evaluation: DesignEvaluation
    objective: str
    n_evaluations: int
    coarse_best: float


def _score(evaluation: DesignEvaluation, objective: str, point: DesignPoint) -> float:
    val = evaluation.eta_int
    if not np.isfinite(val):
        raise NumericalFailureError(
            "objective is not finite", details={"point": point, "evaluation": evaluation}
        )
    if objective == "eta_int_pair_compatible" and not evaluation.pair_compatible:
        return -np.inf
    return val


def optimize(
    bounds: dict,
    objective: str = "eta_int_pair_compatible",
    model: emitter.LeakyModel | None = None,
    base: DesignPoint | None = None,
    coarse_diameter_steps: int = 13,
    refine_rounds: int = 3,
) -> OptimizeResult:
    """Coarse grid search plus shrinking coordinate refinement.

    bounds may contain diameter_um=(lo, hi), n_top_pairs=(lo, hi),
    n_bottom_pairs=(lo, hi) and substrate=[materials]; integer ranges are
    enumerated exhaustively.  The result never scores below the best coarse
    grid point.
    """
    if objective not in OBJECTIVES:
        raise InvalidParameterError(f"objective must be one of {OBJECTIVES}")
    if model is None:
        model = emitter.default_leaky_model()
    base = base or DesignPoint(2.02, 5, 18)

    d_lo, d_hi = bounds.get("diameter_um", (base.diameter_um, base.diameter_um))
    if not DIAMETER_BOUNDS_UM[0] <= d_lo <= d_hi <= DIAMETER_BOUNDS_UM[1]:
        raise InvalidParameterError("diameter bounds outside the design space")
    t_lo, t_hi = bounds.get("n_top_pairs", (base.n_top_pairs, base.n_top_pairs))
    b_lo, b_hi = bounds.get("n_bottom_pairs", (base.n_bottom_pairs, base.n_bottom_pairs))
    substrates = list(bounds.get("substrate", [base.substrate]))

    if d_hi > d_lo:
        diameters = list(np.linspace(d_lo, d_hi, coarse_diameter_steps))
        d_step = (d_hi - d_lo) / (coarse_diameter_steps - 1)
    else:
        diameters = [d_lo]
        d_step = 0.01

    cache: dict[DesignPoint, DesignEvaluation] = {}

    def evaluate(point: DesignPoint) -> float:
        if point not in cache:
            cache[point] = evaluate_design(point, model)
        return _score(cache[point], objective, point)

    best_point = None
    best_score = -np.inf
    for d, nt, nb, sub in itertools.product(
        diameters, range(t_lo, t_hi + 1), range(b_lo, b_hi + 1), substrates
    ):
        p = DesignPoint(float(d), int(nt), int(nb), sub, base.lam0_nm)
        s = evaluate(p)
        if s > best_score:
            best_point, best_score = p, s
    if best_point is None or not np.isfinite(best_score):
        raise NumericalFailureError(
            "no feasible design in bounds", details={"bounds": bounds}
        )
    coarse_best = best_score

    step = d_step / 2.0
    for _ in range(refine_rounds):
        improved = True
        while improved:
            improved = False
            for delta in (step, -step):
                d_new = float(np.clip(best_point.diameter_um + delta, d_lo, d_hi))
                cand = DesignPoint(
                    d_new, best_point.n_top_pairs, best_point.n_bottom_pairs,
                    best_point.substrate, best_point.lam0_nm,
                )
                if cand != best_point and evaluate(cand) > best_score:
                    best_point, best_score = cand, evaluate(cand)
                    improved = True
            for name, lo, hi in (
                ("n_top_pairs", t_lo, t_hi),
                ("n_bottom_pairs", b_lo, b_hi),
            ):
                for delta in (1, -1):
                    v = getattr(best_point, name) + delta
                    if not lo <= v <= hi:
                        continue
                    kw = {
                        "diameter_um": best_point.diameter_um,
                        "n_top_pairs": best_point.n_top_pairs,
                        "n_bottom_pairs": best_point.n_bottom_pairs,
                        "substrate": best_point.substrate,
                        "lam0_nm": best_point.lam0_nm,
                    }
                    kw[name] = v
                    cand = DesignPoint(**kw)
                    if evaluate(cand) > best_score:
                        best_point, best_score = cand, evaluate(cand)
                        improved = True
        step /= 4.0

    assert best_score >= coarse_best
    return OptimizeResult(
        best_point=best_point,
        best_evaluation=cache[best_point],
        objective=objective,
        n_evaluations=len(cache),
        coarse_best=coarse_best,
    )
