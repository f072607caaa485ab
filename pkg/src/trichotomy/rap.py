"""Finite-horizon diagnostics for remote almost periodicity.

A function is remotely tau-periodic when |phi(t + tau) - phi(t)| becomes
small far from the origin, and remotely almost periodic when, for every
eps > 0, the tau's achieving residual < eps beyond some horizon form a
relatively dense set.  These are statements about limits at infinity, so a
finite window can only gather evidence up to a horizon T; every report in
this module carries its horizons explicitly and claims nothing beyond them.

The module also provides the Bebutov shift-space distance (sup over a
ladder of L of min(local sup difference, 1/L)), an empirical Lagrange
stability report (boundedness plus modulus of continuity), and a
compatibility audit comparing the almost periods of a solution with those
of the problem data that produced it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .grid import GridFunction
from .hyperbolicity import WindowTooSmall
from .util import thread_map

__all__ = [
    "RapReport",
    "LagrangeReport",
    "AuditReport",
    "remote_period_residual",
    "almost_period_scan",
    "bebutov_distance",
    "lagrange_report",
    "solution_rap_audit",
    "DEFAULT_T_SCHEDULE",
]

DEFAULT_T_SCHEDULE = (5.0, 10.0, 20.0, 40.0)


def _side_samples(phi: GridFunction, tau: float, T: float, side: str):
    """Grid times beyond the horizon on one side, with t + tau in window."""
    t = phi.times
    if side == "+":
        mask = (t >= T - 1e-12) & (t + tau <= phi.b + 1e-12) & (t + tau >= phi.a - 1e-12)
    elif side == "-":
        mask = (t <= -T + 1e-12) & (t + tau <= phi.b + 1e-12) & (t + tau >= phi.a - 1e-12)
    else:
        raise ValueError(f"side must be '+', '-' or 'both', got {side!r}")
    return t[mask], mask


def remote_period_residual(phi: GridFunction, tau: float, T: float, side: str = "both") -> float:
    """Sup of |phi(t + tau) - phi(t)| over grid points beyond the horizon T.

    ``side`` selects t >= T ('+'), t <= -T ('-'), or the max of both.
    The shifted argument must stay inside the window, so the window has to
    reach at least T + tau past the horizon on each requested side.
    """
    if T < 0:
        raise ValueError("horizon T must be nonnegative")
    sides = ["+", "-"] if side == "both" else [side]
    worst = 0.0
    any_samples = False
    for s in sides:
        ts, mask = _side_samples(phi, tau, T, s)
        if ts.size == 0:
            continue
        any_samples = True
        shifted = phi(ts + tau)
        diff = shifted - phi.values[mask]
        worst = max(worst, float(np.linalg.norm(diff, axis=1).max()))
    if not any_samples:
        need = T + abs(tau)
        raise WindowTooSmall(
            f"no grid samples beyond horizon T = {T:g} with t + tau in "
            f"window [{phi.a:g}, {phi.b:g}] (increase window T to >= {need:g})",
            need,
        )
    return worst


@dataclass
class RapReport:
    """Almost-period scan findings over a finite tau range and T schedule.

    ``accepted`` lists the tau's whose residual drops below eps at some
    horizon in the schedule; ``L_hat`` maps each accepted tau to the
    smallest such horizon.  ``ell_hat`` is the largest gap in the accepted
    set, measured against the scanned range boundaries, so it is finite and
    at most the range length whenever anything was accepted; an empty
    accept list raises the ``not_relatively_dense`` flag instead.
    """

    eps: float
    side: str
    schedule: tuple
    tau_values: np.ndarray
    residuals: np.ndarray
    accepted: list
    L_hat: dict
    ell_hat: float
    not_relatively_dense: bool
    two_sided: bool

    def to_json(self) -> dict:
        curves = []
        for i, tau in enumerate(self.tau_values):
            row = {"tau": float(tau)}
            for j, T in enumerate(self.schedule):
                v = self.residuals[i, j]
                row[f"T_{T:g}"] = None if math.isnan(v) else float(v)
            curves.append(row)
        return {
            "eps": self.eps,
            "side": self.side,
            "T_schedule": [float(T) for T in self.schedule],
            "accepted": [float(t) for t in self.accepted],
            "L_hat": {f"{t:.12g}": float(T) for t, T in self.L_hat.items()},
            "ell_hat": None if math.isinf(self.ell_hat) else self.ell_hat,
            "not_relatively_dense": self.not_relatively_dense,
            "two_sided": self.two_sided,
            "residual_curves": curves,
        }

    def write_csv(self, path) -> None:
        """Residual curves as CSV: one row per tau, one column per horizon."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tau"] + [f"T_{T:g}" for T in self.schedule])
            for i, tau in enumerate(self.tau_values):
                row = [f"{tau:.12g}"]
                for j in range(len(self.schedule)):
                    v = self.residuals[i, j]
                    row.append("" if math.isnan(v) else f"{v:.12g}")
                writer.writerow(row)


def almost_period_scan(
    phi: GridFunction,
    eps: float,
    tau_range: tuple,
    tau_step: float,
    schedule=DEFAULT_T_SCHEDULE,
    side: str = "both",
) -> RapReport:
    """Scan tau over a range for eps-almost-periods of phi.

    For each tau the residual is evaluated at every horizon in the schedule
    that the window supports; tau is accepted if any of them beats eps, and
    the smallest such horizon is recorded as L_hat(eps, tau).  Horizons the
    window cannot support are skipped (recorded as NaN in the curves), so an
    empty accept list is a finding, not an error.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if tau_step <= 0:
        raise ValueError("tau step must be positive")
    if phi.h > tau_step + 1e-12:
        raise ValueError(
            f"grid resolution {phi.h:g} is coarser than tau step {tau_step:g}"
        )
    lo, hi = float(tau_range[0]), float(tau_range[1])
    if hi < lo:
        raise ValueError("empty tau range")
    count = int(math.floor((hi - lo) / tau_step + 1e-9)) + 1
    taus = lo + tau_step * np.arange(count)
    schedule = tuple(sorted(float(T) for T in schedule))

    def scan_one(tau):
        row = np.full(len(schedule), math.nan)
        for j, T in enumerate(schedule):
            try:
                row[j] = remote_period_residual(phi, tau, T, side)
            except WindowTooSmall:
                break
        return row

    residuals = np.array(thread_map(scan_one, list(taus)))
    accepted = []
    L_hat = {}
    for i, tau in enumerate(taus):
        for j, T in enumerate(schedule):
            v = residuals[i, j]
            if not math.isnan(v) and v < eps:
                accepted.append(float(tau))
                L_hat[float(tau)] = T
                break
    if accepted:
        knots = [lo] + accepted + [hi]
        ell_hat = float(max(b - a for a, b in zip(knots, knots[1:])))
        flag = False
    else:
        ell_hat = math.inf
        flag = True
    return RapReport(
        eps=eps,
        side=side,
        schedule=schedule,
        tau_values=taus,
        residuals=residuals,
        accepted=accepted,
        L_hat=L_hat,
        ell_hat=ell_hat,
        not_relatively_dense=flag,
        two_sided=(side == "both"),
    )


def bebutov_distance(phi: GridFunction, psi: GridFunction, L_grid=None) -> float:
    """Shift-space distance: sup over L of min(sup_{|t|<=L}|phi-psi|, 1/L).

    The default L grid is logarithmic from 0.1 to the window half-width
    (50 points).  Both functions must share the window and dimension.
    """
    if (phi.a, phi.b) != (psi.a, psi.b):
        raise ValueError("functions must share the window")
    if phi.dim != psi.dim:
        raise ValueError("functions must share the dimension")
    if L_grid is None:
        half = (phi.b - phi.a) / 2.0
        L_grid = np.geomspace(0.1, max(half, 0.1), 50)
    if phi.values.shape == psi.values.shape:
        diff = np.linalg.norm(phi.values - psi.values, axis=1)
        t = phi.times
    else:
        t = phi.times if phi.h <= psi.h else psi.times
        diff = np.linalg.norm(phi(t) - psi(t), axis=1)
    best = 0.0
    for L in L_grid:
        mask = np.abs(t) <= L + 1e-12
        local = float(diff[mask].max()) if mask.any() else 0.0
        best = max(best, min(local, 1.0 / float(L)))
    return best


@dataclass
class LagrangeReport:
    """Boundedness and uniform-continuity evidence on a finite window."""

    sup_norm: float
    window: tuple
    delta_ladder: list
    omega_hat: list
    slope: float
    bounded: bool
    uc_doubtful: bool
    lagrange_stable: bool

    def to_json(self) -> dict:
        return {
            "sup_norm": self.sup_norm,
            "window": list(self.window),
            "delta_ladder": self.delta_ladder,
            "omega_hat": self.omega_hat,
            "log_log_slope": self.slope,
            "bounded_evidence": self.bounded,
            "uniform_continuity_doubtful": self.uc_doubtful,
            "lagrange_stable_evidence": self.lagrange_stable,
        }


def lagrange_report(phi: GridFunction) -> LagrangeReport:
    """Empirical Lagrange-stability check: bounded range + equicontinuity.

    The modulus of continuity omega_hat(delta) = max |phi(t) - phi(s)| over
    grid pairs with |t - s| <= delta is tabulated on the ladder
    delta in {h, 2h, 4h, 8h, 16h}.  Evidence of boundedness is the absence
    of edge growth (full-window sup within 20% of the middle-80% sup);
    uniform continuity is doubtful when omega_hat decays much slower than
    linearly (log-log slope below 0.5), which is what unresolved
    oscillation looks like on a grid.
    """
    h = phi.h
    vals = phi.values
    m = vals.shape[0]
    ladder = [h * k for k in (1, 2, 4, 8, 16) if k < m]
    omega = []
    w = 0.0
    steps = 0
    for delta in ladder:
        k = int(round(delta / h))
        for j in range(steps + 1, k + 1):
            d = float(np.linalg.norm(vals[j:] - vals[:-j], axis=1).max())
            w = max(w, d)
        steps = k
        omega.append(w)

    sup = phi.sup_norm
    margin = 0.1 * (phi.b - phi.a)
    mid = phi.restrict(phi.a + margin, phi.b - margin)
    mid_sup = mid.sup_norm
    bounded = sup <= 1.2 * mid_sup + 1e-12

    if omega and omega[-1] > 1e-10:
        lo = max(omega[0], 1e-300)
        slope = float(
            np.polyfit(np.log(ladder), np.log(np.maximum(omega, lo * 1e-6)), 1)[0]
        )
    else:
        slope = 1.0
    uc_doubtful = bool(omega and omega[-1] > 1e-10 and slope < 0.5)
    return LagrangeReport(
        sup_norm=sup,
        window=(phi.a, phi.b),
        delta_ladder=ladder,
        omega_hat=omega,
        slope=slope,
        bounded=bounded,
        uc_doubtful=uc_doubtful,
        lagrange_stable=bool(bounded and not uc_doubtful),
    )


@dataclass
class AuditReport:
    """Comparison of almost periods of a solution against its problem data.

    Remote compatibility would make every common almost period of the data
    an almost period of the solution; this audit checks that one direction
    on a finite scan.  It can support the property, never refute it.
    """

    eps_ladder: list
    entries: dict
    scan_params: dict

    def to_json(self) -> dict:
        return {
            "eps_ladder": self.eps_ladder,
            "scan_params": self.scan_params,
            "per_eps": {
                f"{eps:g}": {
                    "input_accepted": {
                        name: [float(t) for t in taus]
                        for name, taus in entry["input_accepted"].items()
                    },
                    "common_input_accepted": [
                        float(t) for t in entry["common_input_accepted"]
                    ],
                    "solution_accepted": [
                        float(t) for t in entry["solution_accepted"]
                    ],
                    "missing": [float(t) for t in entry["missing"]],
                    "compatible_evidence": entry["compatible_evidence"],
                }
                for eps, entry in self.entries.items()
            },
        }


def solution_rap_audit(
    phi: GridFunction,
    inputs: dict,
    eps_ladder,
    tau_range: tuple,
    tau_step: float,
    schedule=DEFAULT_T_SCHEDULE,
    side: str = "both",
) -> AuditReport:
    """Audit whether the solution inherits the almost periods of the data.

    ``inputs`` maps labels (coefficient entries, forcing components,
    nonlinearity slices) to GridFunctions on the window of ``phi``.  For
    each eps in the ladder, every tau accepted by all inputs should be
    accepted for the solution; the ``missing`` list holds the exceptions.
    """
    for name, g in inputs.items():
        if (g.a, g.b) != (phi.a, phi.b):
            raise ValueError(f"input {name!r} does not share the solution window")
    entries = {}
    for eps in eps_ladder:
        input_acc = {}
        for name, g in inputs.items():
            rep = almost_period_scan(g, eps, tau_range, tau_step, schedule, side)
            input_acc[name] = rep.accepted
        common = None
        for taus in input_acc.values():
            s = set(taus)
            common = s if common is None else (common & s)
        common = sorted(common) if common else []
        sol_rep = almost_period_scan(phi, eps, tau_range, tau_step, schedule, side)
        sol_set = set(sol_rep.accepted)
        missing = [t for t in common if t not in sol_set]
        entries[float(eps)] = {
            "input_accepted": input_acc,
            "common_input_accepted": common,
            "solution_accepted": sol_rep.accepted,
            "missing": missing,
            "compatible_evidence": not missing,
        }
    return AuditReport(
        eps_ladder=[float(e) for e in eps_ladder],
        entries=entries,
        scan_params={
            "tau_range": [float(tau_range[0]), float(tau_range[1])],
            "tau_step": float(tau_step),
            "T_schedule": [float(T) for T in schedule],
            "side": side,
        },
    )
