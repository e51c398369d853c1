"""Benchmark presets, single runs and convergence sweeps."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .assembly import Formulation, LoadSpec, ShellProblem, assemble
from .discretization import BoundarySpec, EdgeCondition, PointConstraint
from .errors import InvalidArgumentError, InvalidSetupError, UnsupportedError
from .geometry import HEMI, PCYL, ROOF, STRIP, BenchmarkCase, MultiPatchSurface, PatchLayout, benchmark_geometry
from .linsolve import solve_saddle
from .postprocess import SolutionFields, displacement_at
from .shell_model import MaterialParams
from .splines import NurbsPatch

DEFAULT_CPS = (5, 9, 13, 20, 25, 30)
STRIP_SLENDERNESS = (10.0, 100.0, 1000.0, 10000.0)
MAX_CPS = 60

CLAMPED = EdgeCondition.CLAMPED
SS = EdgeCondition.SIMPLY_SUPPORTED
FREE = EdgeCondition.FREE


@dataclass(frozen=True)
class Probe:
    """Displacement probe: ``weight * (u . direction)`` at ``xi`` on ``patch``."""

    patch: int
    xi: tuple[float, float]
    direction: tuple[float, float, float]
    label: str


@dataclass
class CaseSetup:
    """Everything needed to run one benchmark at a given resolution."""

    case: BenchmarkCase
    layout: PatchLayout
    mat: MaterialParams
    bc: BoundarySpec
    loads: list[LoadSpec]
    probe: Probe
    reference: float
    n_elements_v: int | None = None
    fixed_elements: int | None = None


def _roof(layout: PatchLayout) -> CaseSetup:
    surf = benchmark_geometry(BenchmarkCase.SCORDELIS_LO, layout)
    conds = {k: (SS if k[1] in (0, 2) else FREE) for k in surf.boundary_edges()}
    if layout is PatchLayout.SINGLE:
        probe_at = (0, (0.0, 0.5))
    else:
        probe_at = (0, (0.0, 1.0))
    # axial rigid translation is not restrained by the diaphragms
    pins = [PointConstraint(probe_at[0], probe_at[1], 1)]
    return CaseSetup(
        BenchmarkCase.SCORDELIS_LO,
        layout,
        MaterialParams(ROOF["E"], ROOF["nu"], ROOF["thickness"]),
        BoundarySpec(conds, pins),
        [LoadSpec("area", (0.0, 0.0, -1.0), ROOF["load"])],
        Probe(probe_at[0], probe_at[1], (0.0, 0.0, -1.0), "-u_z at free-edge midpoint"),
        0.3024,
    )


def _hemisphere() -> CaseSetup:
    surf = benchmark_geometry(BenchmarkCase.HEMISPHERE, PatchLayout.FOUR)
    conds = {k: (FREE if k[1] == 0 else CLAMPED) for k in surf.boundary_edges()}
    loads = []
    for k in range(4):
        sign = 1.0 if k % 2 == 0 else -1.0
        loads.append(LoadSpec("point", "normal", sign * HEMI["load"], patch=k, location=(0.0, 0.0)))
    # rotation about the axis leaves the pole clamp untouched
    pins = [PointConstraint(0, (0.0, 0.0), 0)]
    return CaseSetup(
        BenchmarkCase.HEMISPHERE,
        PatchLayout.FOUR,
        MaterialParams(HEMI["E"], HEMI["nu"], HEMI["thickness"]),
        BoundarySpec(conds, pins),
        loads,
        Probe(0, (0.0, 0.0), (1.0, 0.0, 0.0), "radial displacement at a loaded point"),
        0.0924,
    )


def _pinched_cylinder() -> CaseSetup:
    surf = benchmark_geometry(BenchmarkCase.PINCHED_CYLINDER, PatchLayout.FOUR)
    conds = {k: SS for k in surf.boundary_edges()}
    loads = [
        LoadSpec("point", "normal", -PCYL["load"], patch=k, location=(0.0, 0.5)) for k in (0, 2)
    ]
    pins = [PointConstraint(0, (0.0, 0.5), 1)]
    return CaseSetup(
        BenchmarkCase.PINCHED_CYLINDER,
        PatchLayout.FOUR,
        MaterialParams(PCYL["E"], PCYL["nu"], PCYL["thickness"]),
        BoundarySpec(conds, pins),
        loads,
        Probe(0, (0.0, 0.5), (0.0, 0.0, -1.0), "inward radial displacement under the load"),
        1.8248e-5,
    )


def _strip(slenderness: float) -> CaseSetup:
    surf = benchmark_geometry(BenchmarkCase.CYLINDER_STRIP, PatchLayout.SINGLE)
    t = STRIP["radius"] / slenderness
    conds = {k: (CLAMPED if k[1] == 3 else FREE) for k in surf.boundary_edges()}
    q = 0.1 * t**3
    return CaseSetup(
        BenchmarkCase.CYLINDER_STRIP,
        PatchLayout.SINGLE,
        MaterialParams(STRIP["E"], STRIP["nu"], t),
        BoundarySpec(conds),
        [LoadSpec("edge_line", (1.0, 0.0, 0.0), q, patch=0, edge=1)],
        Probe(0, (1.0, 0.5), (1.0, 0.0, 0.0), "radial displacement at free-edge midpoint"),
        math.pi / 4.0 * 1.2,
        n_elements_v=1,
        fixed_elements=10,
    )


def case_setup(case: str | BenchmarkCase, patches: int = 1, slenderness: float | None = None) -> CaseSetup:
    case = BenchmarkCase(case)
    if case is BenchmarkCase.SCORDELIS_LO:
        if patches not in (1, 4):
            raise InvalidArgumentError("roof supports 1 or 4 patches")
        return _roof(PatchLayout.SINGLE if patches == 1 else PatchLayout.FOUR)
    if case is BenchmarkCase.HEMISPHERE:
        return _hemisphere()
    if case is BenchmarkCase.PINCHED_CYLINDER:
        return _pinched_cylinder()
    return _strip(100.0 if slenderness is None else float(slenderness))


@dataclass
class RunReport:
    case: str
    formulation: str
    degree: int
    cps: int | None
    slenderness: float | None
    patches: int
    probe: float
    reference: float
    rel_error: float
    wall_time: float
    dofs: dict[str, int]
    residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def load_surface(path: str | Path) -> MultiPatchSurface:
    """Read a patch JSON file: one patch object or a list of them."""
    data = json.loads(Path(path).read_text())
    items = data if isinstance(data, list) else [data]
    try:
        patches = [NurbsPatch.from_json(d) for d in items]
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"malformed patch JSON in {path}: {exc}") from exc
    return MultiPatchSurface.detect(patches)


def _check_surface(setup: CaseSetup, surf: MultiPatchSurface) -> None:
    ref = benchmark_geometry(setup.case, setup.layout)
    if len(surf.patches) != len(ref.patches):
        raise InvalidSetupError(f"{setup.case.value} needs {len(ref.patches)} patch(es), got {len(surf.patches)}")
    if sorted(surf.boundary_edges()) != sorted(ref.boundary_edges()):
        raise InvalidSetupError("custom geometry must keep the benchmark's patch and edge numbering")


def build_problem(
    setup: CaseSetup,
    formulation: str | Formulation,
    degree: int,
    cps: int | None,
    surface: MultiPatchSurface | None = None,
) -> ShellProblem:
    """Problem for ``setup``.  A custom ``surface`` replaces the benchmark
    geometry but keeps its supports, loads and probe."""
    if surface is None:
        surf = benchmark_geometry(setup.case, setup.layout)
    else:
        _check_surface(setup, surface)
        surf = surface
    if setup.fixed_elements is not None:
        n_el = setup.fixed_elements
    else:
        if cps is None:
            raise InvalidArgumentError("cps is required for this case")
        n_el = int(cps) - degree
        if n_el < 1:
            raise InvalidArgumentError(f"cps={cps} too small for degree {degree}")
        if cps > MAX_CPS:
            raise InvalidArgumentError(f"cps is capped at {MAX_CPS}")
    return ShellProblem(surf, setup.mat, setup.bc, setup.loads, Formulation(formulation), degree, n_el, setup.n_elements_v)


def probe_value(fields: SolutionFields, probe: Probe) -> float:
    d = displacement_at(fields, probe.patch, probe.xi)
    return float(d @ np.asarray(probe.direction))


def run_case(
    case: str | BenchmarkCase,
    formulation: str | Formulation,
    degree: int,
    cps: int | None = None,
    slenderness: float | None = None,
    patches: int = 1,
    keep: bool = False,
    surface: MultiPatchSurface | None = None,
):
    """Run one benchmark end to end.  Returns the report, plus the solved
    fields when ``keep`` is set."""
    setup = case_setup(case, patches, slenderness)
    t0 = time.perf_counter()
    problem = build_problem(setup, formulation, degree, cps, surface)
    system = assemble(problem)
    sol = solve_saddle(system)
    fields = SolutionFields(system, sol)
    val = probe_value(fields, setup.probe)
    wall = time.perf_counter() - t0
    dofs = {name: s.stop - s.start for name, s in system.blocks.items()}
    dofs["total"] = system.size
    rep = RunReport(
        case=setup.case.value,
        formulation=Formulation(formulation).value,
        degree=degree,
        cps=None if setup.fixed_elements is not None else cps,
        slenderness=slenderness if setup.case is BenchmarkCase.CYLINDER_STRIP else None,
        patches=len(problem.surface.patches),
        probe=val,
        reference=setup.reference,
        rel_error=abs(val - setup.reference) / abs(setup.reference),
        wall_time=wall,
        dofs=dofs,
        residual=sol.residual,
    )
    return (rep, fields) if keep else rep


@dataclass
class SweepConfig:
    case: str
    formulations: list[str] = field(default_factory=lambda: ["m"])
    degrees: list[int] = field(default_factory=lambda: [2])
    cps: list[int] = field(default_factory=lambda: list(DEFAULT_CPS))
    slenderness: list[float] = field(default_factory=lambda: list(STRIP_SLENDERNESS))
    patches: int = 1

    @classmethod
    def from_json(cls, data: dict | str | Path) -> "SweepConfig":
        if isinstance(data, (str, Path)):
            data = json.loads(Path(data).read_text())
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidArgumentError(f"unknown sweep keys {sorted(unknown)}")
        cfg = cls(**data)
        if not cfg.formulations or not cfg.degrees:
            raise InvalidArgumentError("sweep axes must be nonempty")
        BenchmarkCase(cfg.case)
        return cfg


def convergence_sweep(cfg: SweepConfig, progress: Callable[[RunReport], None] | None = None) -> list[RunReport]:
    """All runs of a sweep, ordered by (formulation, degree, cps/slenderness)."""
    reports = []
    strip = BenchmarkCase(cfg.case) is BenchmarkCase.CYLINDER_STRIP
    axis = sorted(cfg.slenderness) if strip else sorted(cfg.cps)
    if not axis:
        raise InvalidArgumentError("sweep axes must be nonempty")
    for form in cfg.formulations:
        for p in sorted(cfg.degrees):
            for a in axis:
                if strip:
                    rep = run_case(cfg.case, form, p, slenderness=a)
                else:
                    rep = run_case(cfg.case, form, p, cps=int(a), patches=cfg.patches)
                reports.append(rep)
                if progress:
                    progress(rep)
    return reports


def series(reports: list[RunReport]) -> dict[str, list[tuple[float, float]]]:
    """Plot-ready normalized probe series keyed by ``formulation/p``."""
    out: dict[str, list[tuple[float, float]]] = {}
    for r in reports:
        x = r.slenderness if r.cps is None else r.cps
        out.setdefault(f"{r.formulation}/p{r.degree}", []).append((x, r.probe / r.reference))
    return out


def write_reports(path: str | Path, reports: list[RunReport]) -> Path:
    path = Path(path)
    payload = {"runs": [r.to_dict() for r in reports], "series": series(reports)}
    path.write_text(json.dumps(payload, indent=2))
    return path


def supported(case: str, patches: int) -> None:
    c = BenchmarkCase(case)
    if patches == 4 and c in (BenchmarkCase.CYLINDER_STRIP,):
        raise UnsupportedError("the strip is a single-patch case")
    if patches == 1 and c in (BenchmarkCase.HEMISPHERE, BenchmarkCase.PINCHED_CYLINDER):
        raise UnsupportedError(f"{c.value} is a four-patch case")
