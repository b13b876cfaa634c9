"""End-to-end chain: transfer matrix -> realisable state space -> oscillator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qfilt.oscillator import GeneralizedOpenOscillator, extract_slh
from qfilt.realizability import (
    DEFAULT_TOL,
    RealizabilityReport,
    Tolerances,
    check_realizable,
    check_symplectic_tf,
    imaginary_grid,
    transform_to_realizable,
)
from qfilt.statespace import Scale, StateSpace, denormalize, tf_to_minimal_ss
from qfilt.tfio import TransferMatrix, assemble_doubled_up, normalize_grid


@dataclass
class PipelineResult:
    minimal: StateSpace
    normalized: StateSpace
    realizable: StateSpace
    X: np.ndarray
    T: np.ndarray
    report: RealizabilityReport
    oscillator: GeneralizedOpenOscillator
    rate: float
    extra: dict[str, Any] = field(default_factory=dict)


def pick_rate(tm: TransferMatrix, rate: float | None = None) -> float:
    """Normalisation rate: explicit value, else the symbol ``s0``, else 2 (no rescaling)."""
    if rate is not None:
        return float(rate)
    if "s0" in tm.symbols and tm.symbols["s0"] > 0:
        return float(tm.symbols["s0"])
    return 2.0


def realize(
    tm: TransferMatrix, rate: float | None = None, tol: Tolerances = DEFAULT_TOL
) -> PipelineResult:
    """Run the full realisation chain on a transfer matrix.

    The doubled-up grid is rescaled to s = (rate/2) s', realised minimally,
    transformed to a realisable form, then scaled back.
    """
    rate = pick_rate(tm, rate)
    grid = assemble_doubled_up(tm)
    norm_grid = normalize_grid(grid, rate)
    minimal = tf_to_minimal_ss(norm_grid, Scale(rate))
    realizable_n, details = transform_to_realizable(minimal, tol, return_details=True)
    dimensional = denormalize(realizable_n)
    report = check_realizable(dimensional, tol)
    goo = extract_slh(dimensional, tol)
    return PipelineResult(
        minimal=minimal,
        normalized=realizable_n,
        realizable=dimensional,
        X=details["X"],
        T=details["T"],
        report=report,
        oscillator=goo,
        rate=rate,
    )


def symplectic_gate(tm: TransferMatrix, start: float = 0.0, stop: float = 10.0, points: int = 200, tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    grid = assemble_doubled_up(tm)
    return check_symplectic_tf(grid, imaginary_grid(start, stop, points), tol)
