"""Delay-margin search by bisection, and the four-criterion margin table.

Bisection assumes feasibility is monotone in the varied delay; that holds
for every criterion on the shipped benchmark but is not guaranteed in
general, so :func:`monotonicity_audit` is provided as a guard for new
systems.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import criteria_lmi, criteria_spectral
from .lmi_core import LmiProblem, SolverConfig, solve_feasibility
from .model import DiscreteIds, IdsSystem, ValidationError, validate_system

__all__ = [
    "CRITERIA",
    "criterion_feasible",
    "bisect_margin",
    "table1",
    "Table1Result",
    "monotonicity_audit",
    "AuditReport",
    "TABLE1_COLUMNS",
]

#: criterion id -> ("lmi" | "spectral", requires-discrete-system)
CRITERIA = {
    "amc": ("lmi", False),
    "th2-coupled": ("lmi", False),
    "single": ("lmi", False),
    "th1": ("lmi", False),
    "th2-lmi": ("lmi", False),
    "laa": ("lmi", True),
    "spectral": ("spectral", False),
    "spectral-weighted": ("spectral", False),
    "laa-spectral": ("spectral", True),
    "single-delay": ("spectral", False),
}

TABLE1_COLUMNS = ("th2-lmi", "amc", "single", "spectral")


def _check_criterion(criterion: str, sys) -> None:
    if criterion not in CRITERIA:
        raise ValueError(
            f"unknown criterion {criterion!r}; valid: {', '.join(sorted(CRITERIA))}"
        )
    _, needs_discrete = CRITERIA[criterion]
    if needs_discrete and not isinstance(sys, DiscreteIds):
        raise ValueError(f"criterion {criterion!r} requires a discrete-delay system")
    if not needs_discrete and not isinstance(sys, IdsSystem):
        raise ValueError(f"criterion {criterion!r} requires an integral system")


def criterion_feasible(
    sys,
    criterion: str,
    cfg: SolverConfig | None = None,
    warm: dict | None = None,
    alpha=None,
) -> tuple[bool, dict | None]:
    """Evaluate one criterion; returns (verdict, certifying witness or None).

    ``warm`` is an extra solver start (used by the bisection chain);
    ``alpha`` selects the weights of "spectral-weighted" (optimized when
    absent).
    """
    _check_criterion(criterion, sys)
    kind, _ = CRITERIA[criterion]
    if kind == "lmi":
        problem: LmiProblem = criteria_lmi.LMI_CRITERIA[criterion](sys)
        if warm is not None:
            problem = replace(problem, starts=(warm,) + problem.starts)
        report = solve_feasibility(problem, cfg)
        return report.feasible, (report.witness if report.feasible else None)
    if criterion == "spectral":
        return criteria_spectral.check_spectral(sys).passed, None
    if criterion == "spectral-weighted":
        if alpha is None:
            alpha, _rho = criteria_spectral.optimize_weights(sys)
        return criteria_spectral.check_spectral_weighted(sys, alpha).passed, None
    if criterion == "laa-spectral":
        return criteria_spectral.laa_spectral(sys).passed, None
    if criterion == "single-delay":
        if sys.N != 1:
            raise ValueError("criterion 'single-delay' requires N = 1")
        return criteria_spectral.single_delay_checks(sys.A[0], sys.tau[0]).rho_pass, None
    raise AssertionError(criterion)


def _with_delay(sys, index: int, value: float):
    tau = list(sys.tau)
    if not 0 <= index < len(tau):
        raise ValueError(f"vary index {index} out of range for N={len(tau)}")
    tau[index] = float(value)
    if isinstance(sys, DiscreteIds):
        return validate_system(DiscreteIds(A=sys.A, tau=tuple(tau)))
    return validate_system(IdsSystem(A=sys.A, tau=tuple(tau)))


def bisect_margin(
    sys_template,
    vary_index: int,
    criterion: str,
    lo: float = 1e-4,
    hi: float | None = None,
    tol: float = 1e-4,
    cfg: SolverConfig | None = None,
) -> float | None:
    """Largest value of the varied delay (within tol) at which the criterion
    holds, assuming monotone feasibility; None when it already fails at lo.

    LMI probes reuse the witness of the last feasible probe as a warm start,
    and run with triple the configured restarts once the bracket closes in
    on the boundary.
    """
    _check_criterion(criterion, sys_template)
    cfg = cfg or SolverConfig()
    if hi is None:
        hi = 10.0 * max(sys_template.tau)
    if not (0 < lo < hi):
        raise ValueError(f"invalid bracket [{lo}, {hi}]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    boosted = replace(cfg, restarts=3 * cfg.restarts)
    warm: dict | None = None

    def probe(value: float, width: float) -> bool:
        nonlocal warm
        try:
            probe_sys = _with_delay(sys_template, vary_index, value)
        except ValidationError:
            return False  # varying a discrete delay out of order
        use = boosted if width <= 16 * tol else cfg
        ok, wit = criterion_feasible(probe_sys, criterion, use, warm=warm)
        if ok and wit is not None:
            warm = wit
        return ok

    if not probe(lo, hi - lo):
        return None
    if probe(hi, hi - lo):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if probe(mid, hi - lo):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class Table1Result:
    rows: tuple[float, ...]
    columns: tuple[str, ...]
    cells: dict  # (row_value, column_id) -> float | None

    def to_csv(self) -> str:
        lines = ["tau1, " + ", ".join(self.columns)]
        for r in self.rows:
            rendered = [
                "inf" if self.cells[(r, c)] is None else f"{self.cells[(r, c)]:.6g}"
                for c in self.columns
            ]
            lines.append(f"{r:.6g}, " + ", ".join(rendered))
        return "\n".join(lines) + "\n"


def table1(
    sys: IdsSystem,
    tol: float = 1e-4,
    cfg: SolverConfig | None = None,
    rows: tuple[float, ...] = (0.4, 0.3, 0.2, 0.1),
) -> Table1Result:
    """Margin of the second delay under the four standard criteria, for each
    first-delay row.  Cells that fail already at 1e-4 render as "inf"."""
    if sys.N != 2:
        raise ValueError("the margin table expects a two-delay system")
    cells = {}
    for r in rows:
        base = sys.with_delays((r, sys.tau[1]))
        for c in TABLE1_COLUMNS:
            cells[(r, c)] = bisect_margin(base, 1, c, lo=1e-4, tol=tol, cfg=cfg)
    return Table1Result(rows=tuple(rows), columns=TABLE1_COLUMNS, cells=cells)


@dataclass(frozen=True)
class AuditReport:
    grid: tuple[float, ...]
    verdicts: tuple[bool, ...]
    violations: tuple[tuple[float, float], ...]

    @property
    def monotone(self) -> bool:
        return not self.violations


def monotonicity_audit(
    sys_template,
    vary_index: int,
    criterion: str,
    grid,
    cfg: SolverConfig | None = None,
) -> AuditReport:
    """Evaluate the criterion on an ascending delay grid and report every
    feasible-after-infeasible pattern (which would invalidate bisection)."""
    grid = tuple(float(g) for g in grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly ascending")
    verdicts = []
    for g in grid:
        sys_g = _with_delay(sys_template, vary_index, g)
        ok, _ = criterion_feasible(sys_g, criterion, cfg)
        verdicts.append(ok)
    violations = []
    last_infeasible = None
    for g, ok in zip(grid, verdicts):
        if not ok:
            last_infeasible = g
        elif last_infeasible is not None:
            violations.append((last_infeasible, g))
    return AuditReport(grid=grid, verdicts=tuple(verdicts), violations=tuple(violations))
