"""Pairwise phase-synchronization measures: PLV, PLI, WPLI.

All three take two phase vectors in (-pi, pi] and return a value in [0, 1].
Each measure depends on the phase difference only through a 2*pi-periodic
function (exp for PLV, sign of sin for PLI, sin for WPLI), so the raw
difference of wrapped phases, which lies in (-2*pi, 2*pi), needs no
re-wrapping.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dsp import PhaseWindow

MEASURES = ("plv", "pli", "wpli")
WPLI_VARIANTS = ("sign_average", "vinck")


class SyncError(Exception):
    pass


class LengthMismatchError(SyncError):
    """Phase vectors of unequal length."""


class AllZeroPhaseDiffError(SyncError):
    """Every sin(phase difference) is zero, so WPLI is undefined."""


@dataclass
class SyncMatrix:
    """Symmetric per-window synchronization matrix; diagonal fixed at 1."""

    window_index: int
    end_s: float
    measure: str
    labels: list[str]
    w: np.ndarray


def _delta(phase_h, phase_k) -> np.ndarray:
    h = np.asarray(phase_h, dtype=np.float64)
    k = np.asarray(phase_k, dtype=np.float64)
    if h.shape != k.shape or h.ndim != 1 or len(h) < 1:
        raise LengthMismatchError(f"phase vectors {h.shape} vs {k.shape}")
    return h - k


def plv(phase_h, phase_k) -> float:
    """Mean phase coherence |mean(exp(i*(phi_h - phi_k)))|."""
    d = _delta(phase_h, phase_k)
    return float(np.abs(np.mean(np.exp(1j * d))))


def pli(phase_h, phase_k) -> float:
    """|mean(sign(sin(phi_h - phi_k)))|, i.e. the sign of the wrapped difference.

    sign(sin(d)) equals sign(d) for d in (-pi, pi) and is invariant to the
    2*pi jumps of wrapped inputs; differences of exactly 0 (mod pi) are the
    discarded center cases and contribute 0.  Zero for couplings centered
    around 0 (mod pi); one for perfect locking at any other difference.
    """
    d = _delta(phase_h, phase_k)
    return float(np.abs(np.mean(np.sign(np.sin(d)))))


def wpli(phase_h, phase_k, variant: str = "sign_average") -> float:
    """Weighted phase lag index.

    The default reduces algebraically to |mean(sign(sin(delta)))| over the
    samples with sin(delta) != 0.  The "vinck" variant is the
    magnitude-weighted form |sum(sin(delta))| / sum(|sin(delta)|).
    """
    if variant not in WPLI_VARIANTS:
        raise ValueError(f"unknown WPLI variant {variant!r}")
    d = _delta(phase_h, phase_k)
    s = np.sin(d)
    nonzero = s != 0.0
    if not nonzero.any():
        raise AllZeroPhaseDiffError("sin(phase difference) is zero everywhere")
    if variant == "vinck":
        return float(np.abs(s.sum()) / np.abs(s).sum())
    return float(np.abs(np.mean(np.sign(s[nonzero]))))


def _pair_measure(measure: str, wpli_variant: str):
    if measure == "plv":
        return plv
    if measure == "pli":
        return pli
    if measure == "wpli":
        return lambda a, b: wpli(a, b, variant=wpli_variant)
    raise ValueError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def sync_matrix(
    phase_windows: list[PhaseWindow],
    measure: str = "pli",
    wpli_variant: str = "sign_average",
) -> list[SyncMatrix]:
    """Compute all channel pairs per window; symmetric, diagonal set to 1."""
    fn = _pair_measure(measure, wpli_variant)
    out = []
    for win in phase_windows:
        n = win.phase.shape[0]
        w = np.eye(n)
        for h in range(n):
            for k in range(h + 1, n):
                w[h, k] = w[k, h] = fn(win.phase[h], win.phase[k])
        out.append(
            SyncMatrix(
                window_index=win.index,
                end_s=win.end_s,
                measure=measure,
                labels=list(win.labels),
                w=w,
            )
        )
    return out


def write_pair_csv(matrices: list[SyncMatrix], path) -> None:
    """Dump every pair value: window_index,end_s,measure,ch_h,ch_k,value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["window_index", "end_s", "measure", "ch_h", "ch_k", "value"])
        for m in matrices:
            n = len(m.labels)
            for h in range(n):
                for k in range(h + 1, n):
                    writer.writerow(
                        [m.window_index, m.end_s, m.measure,
                         m.labels[h], m.labels[k], repr(float(m.w[h, k]))]
                    )
