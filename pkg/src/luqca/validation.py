"""Validity checks for automaton definitions, collected into a report."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOL, QcaDefinition
from .linalg import CommutationReport, commutes_with_translations, is_unitary
from .operators import DEFAULT_CONFIG_CAP, ControlledRule, all_quantum_slots, embed_block


@dataclass
class Check:
    name: str
    residual: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual, "passed": self.passed,
                "detail": self.detail}


@dataclass
class ValidationReport:
    checks: list[Check] = field(default_factory=list)
    commutation: CommutationReport | None = None
    tol: float = DEFAULT_TOL
    mode: str = "exhaustive"
    phases: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        ok = all(c.passed for c in self.checks)
        if self.commutation is not None:
            ok = ok and self.commutation.passed
        return ok

    def residual(self, name: str) -> float:
        for c in self.checks:
            if c.name == name:
                return c.residual
        raise KeyError(name)

    @property
    def max_residual(self) -> float:
        values = [c.residual for c in self.checks]
        if self.commutation is not None:
            values.append(self.commutation.max_residual)
        return max(values, default=0.0)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "mode": self.mode,
            "checks": [c.as_dict() for c in self.checks],
            "quiescent_phases": {k: [v.real, v.imag] for k, v in self.phases.items()},
            "commutation": self.commutation.as_dict() if self.commutation else None,
        }

    def summary(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'}  (tol {self.tol:g}, {self.mode})"]
        for c in self.checks:
            mark = "ok " if c.passed else "BAD"
            extra = f"  {c.detail}" if c.detail else ""
            lines.append(f"  [{mark}] {c.name:<24} {c.residual:.3e}{extra}")
        if self.commutation is not None:
            for off, r in zip(self.commutation.offsets, self.commutation.residuals):
                mark = "ok " if r <= self.tol else "BAD"
                lines.append(f"  [{mark}] commutation {str(off):<12} {r:.3e}")
        return "\n".join(lines)


def _rule_unitarity(rule: ControlledRule, layout, config_cap, samples, rng):
    """Max block unitarity residual and classical bijectivity over configurations."""
    exhaustive = rule.n_configs <= config_cap
    configs = rule.configs() if exhaustive else rule.random_configs(rng, samples)
    worst = 0.0
    images = set()
    count = 0
    for cfg in configs:
        count += 1
        act = rule.action(cfg)
        if act.block is not None:
            _, res = is_unitary(act.block, tol=math.inf)
            worst = max(worst, res)
        images.add(act.classical if act.classical is not None else tuple(cfg))
    bijective = len(images) == count if exhaustive else None
    return worst, bijective, exhaustive


def _quiescence(qca: QcaDefinition, op, n_cells: int):
    """Residual of ``op |q...q> = e^{i theta} |q...q>`` and the phase."""
    L = qca.layout
    q = qca.quiescent
    if isinstance(op, ControlledRule):
        cvals, qidx = L.split(q)
        cfg = tuple(cvals) * n_cells
        act = op.action(cfg)
        if act.classical is not None and tuple(act.classical) != cfg:
            return 2.0, 1.0 + 0j
        slots = all_quantum_slots(L, n_cells)
        block = embed_block(act, slots, L)
        Q = L.quantum_dimension
        col_index = sum(qidx * Q ** (n_cells - 1 - k) for k in range(n_cells))
        col = block[:, col_index]
    else:
        D = L.cell_dimension
        col_index = sum(q * D ** (n_cells - 1 - k) for k in range(n_cells))
        col = op[:, [col_index]]
        col = np.asarray(col.toarray() if hasattr(col, "toarray") else col).reshape(-1)
    value = col[col_index]
    phase = value / abs(value) if abs(value) > 0 else 1.0 + 0j
    target = np.zeros_like(col)
    target[col_index] = phase
    return float(np.linalg.norm(col - target)), complex(phase)


def validate_definition(qca: QcaDefinition, tol: float = DEFAULT_TOL, commutation: bool = True,
                        config_cap: int = DEFAULT_CONFIG_CAP, samples: int = 512,
                        seed: int = 0, extra_configs=()) -> ValidationReport:
    """Unitarity, quiescence and translation-commutation checks.

    Structural problems (wrong shapes) are raised by the definition itself;
    everything numeric ends up as a residual in the report.
    """
    report = ValidationReport(tol=tol)
    rng = np.random.default_rng(seed)
    L = qca.layout
    n = qca.neighborhood.size
    for label, op, cells in (("U", qca.read, n), ("V", qca.update, 1)):
        rule_form = isinstance(op, ControlledRule) or L.has_classical
        if rule_form:
            rule = qca.read_rule if label == "U" else qca.update_rule
            worst, bijective, exhaustive = _rule_unitarity(rule, L, config_cap, samples, rng)
            if not exhaustive:
                report.mode = "sampled"
            report.checks.append(Check(f"unitarity {label}", worst, worst <= tol,
                                       "" if exhaustive else "sampled blocks"))
            if bijective is not None:
                report.checks.append(Check(f"classical bijection {label}",
                                           0.0 if bijective else 1.0, bijective))
        else:
            ok, res = is_unitary(op, tol)
            report.checks.append(Check(f"unitarity {label}", res, ok))
        if qca.quiescent is not None:
            res, phase = _quiescence(qca, op, cells)
            report.phases[label] = phase
            angle = cmath.phase(phase)
            report.checks.append(Check(f"quiescence {label}", res, res <= tol,
                                       f"phase {angle:+.6f} rad"))
    if commutation:
        report.commutation = commutes_with_translations(
            qca, tol=tol, config_cap=config_cap, samples=samples, seed=seed,
            extra_configs=extra_configs)
        if report.commutation.mode == "sampled":
            report.mode = "sampled"
    return report
