"""Piecewise group paths and their lifts through the graph foliation.

A :class:`GPath` is a curve in the group given by segments, each carrying a
total displacement and a relative time weight; the path clock is normalized
to [0, 1] at construction.  Its left-logarithmic derivative is piecewise
constant, which is what the lifting equation consumes: the lift of a path
``c`` starting at ``x0`` solves ``y' = sum_i f_i(t) zeta_i(y)`` where ``f`` is
that derivative.  The group component itself advances in closed form, so the
lift endpoint's group part is exact whenever the lift completes.

Segments:

* ``LinearSeg(delta, duration)`` — abelian model only; the group moves by
  ``delta`` in total over the segment, so ``duration`` is a pure clock weight.
* ``ExpSeg(X, duration)`` — either model; ``X`` is a rate in basis
  coordinates: the segment traces ``c_prev * exp(tau * X)`` for
  ``tau in [0, duration]`` and advances by ``exp(duration * X)`` in total.
  Splitting an ExpSeg into consecutive pieces with the same ``X`` therefore
  never changes the endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import AlgebraError
from .flow import (
    COMPLETE,
    ESCAPED,
    STEP_LIMIT,
    FlowOutcome,
    IntegratorConfig,
    integrate_autonomous,
)

__all__ = [
    "LinearSeg",
    "ExpSeg",
    "GPath",
    "LiftResult",
    "PathError",
    "LiftEscapedError",
    "lift_path",
    "gamma",
    "equivariance_check",
]


class PathError(ValueError):
    pass


class LiftEscapedError(RuntimeError):
    def __init__(self, result: "LiftResult"):
        super().__init__(
            f"lift escaped at t={result.escape_time} (segment {result.failed_segment})"
        )
        self.result = result


@dataclass(frozen=True)
class LinearSeg:
    delta: tuple
    duration: float = 1.0


@dataclass(frozen=True)
class ExpSeg:
    X: tuple
    duration: float = 1.0


_ENDPOINT_MATCH_TOL = 1e-9


class GPath:
    """Piecewise path in the group model, clock normalized to [0, 1]."""

    def __init__(self, group, start, segments: Sequence):
        self.group = group
        try:
            self.start = group.element(start)
        except AlgebraError as exc:
            raise PathError(f"bad start point: {exc}") from exc
        segs = list(segments)
        d = group.dim
        vecs: List[np.ndarray] = []
        kinds: List[str] = []
        durations: List[float] = []
        for s in segs:
            if not (s.duration > 0.0 and math.isfinite(s.duration)):
                raise PathError("segment durations must be positive and finite")
            if isinstance(s, LinearSeg):
                if group.kind != "abelian":
                    raise PathError("LinearSeg requires the abelian group model")
                vec = np.asarray(s.delta, dtype=float)   # total displacement
                kinds.append("linear")
            elif isinstance(s, ExpSeg):
                # X is a rate; the total log-displacement is duration * X
                vec = np.asarray(s.X, dtype=float) * float(s.duration)
                kinds.append("exp")
            else:
                raise PathError(f"unknown segment type {type(s).__name__}")
            if vec.shape != (d,):
                raise PathError(f"segment vector must have length {d}")
            if not np.all(np.isfinite(vec)):
                raise PathError("segment vector must be finite")
            vecs.append(vec)
            durations.append(float(s.duration))
        self.segments = tuple(segs)
        self._kinds = kinds
        self._vecs = vecs
        total = sum(durations)
        self.widths = [dur / total for dur in durations] if segs else []
        bounds = [0.0]
        for w in self.widths:
            bounds.append(bounds[-1] + w)
        if segs:
            bounds[-1] = 1.0
        self._bounds = bounds

        # closed-form prefix displacements: group point at each segment start
        prefix = [self.start]
        g = self.start
        for kind, vec in zip(kinds, vecs):
            if kind == "linear":
                g = group.mul(g, vec)
            else:
                g = group.mul(g, group.exp_segment(vec, 1.0))
            prefix.append(g)
        self._prefix = prefix

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def endpoint(self):
        return self._prefix[-1]

    def velocity(self, k: int) -> list:
        """Left-logarithmic derivative on segment k w.r.t. the path clock."""
        w = self.widths[k]
        return [float(v) / w for v in self._vecs[k]]

    def left_log_derivative(self, t: float) -> list:
        """Piecewise-constant derivative at path time t in [0, 1].

        Right-continuous at interior boundaries; t = 1 uses the last segment.
        """
        if not self.segments:
            raise PathError("empty path has no derivative")
        if not 0.0 <= t <= 1.0:
            raise PathError("path time must lie in [0, 1]")
        k = self._segment_index(t)
        return self.velocity(k)

    def _segment_index(self, t: float) -> int:
        b = self._bounds
        for k in range(len(self.widths)):
            if t < b[k + 1]:
                return k
        return len(self.widths) - 1

    def group_point(self, k: int, frac: float):
        """Group point a fraction ``frac`` of the way through segment k."""
        base = self._prefix[k]
        vec = self._vecs[k]
        if self._kinds[k] == "linear":
            return base + frac * vec
        return self.group.mul(base, self.group.exp_segment(vec, frac))

    def reverse(self) -> "GPath":
        segs = []
        for s in reversed(self.segments):
            if isinstance(s, LinearSeg):
                segs.append(LinearSeg(tuple(-v for v in s.delta), s.duration))
            else:
                segs.append(ExpSeg(tuple(-v for v in s.X), s.duration))
        return GPath(self.group, self.endpoint(), segs)

    def concat(self, other: "GPath") -> "GPath":
        if type(other.group) is not type(self.group) or other.group.dim != self.group.dim:
            raise PathError("cannot concatenate paths over different group models")
        if self.group.distance(self.endpoint(), other.start) > _ENDPOINT_MATCH_TOL:
            raise PathError("second path must start at the first path's endpoint")
        segs = []
        for p in (self, other):
            # rebuild from total displacements so endpoints survive reweighting
            for kind, vec, w in zip(p._kinds, p._vecs, p.widths):
                if kind == "linear":
                    segs.append(LinearSeg(tuple(vec), w))
                else:
                    segs.append(ExpSeg(tuple(vec / w), w))
        return GPath(self.group, self.start, segs)

    @staticmethod
    def from_m_projection(group, start, points: Sequence[Sequence[float]]) -> "GPath":
        """Abelian path whose lift's manifold projection follows ``points``.

        Consecutive differences become linear segments with equal weights.
        """
        if group.kind != "abelian":
            raise PathError("from_m_projection requires the abelian group model")
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise PathError("need at least two projection points")
        segs = [
            LinearSeg(tuple(pts[i + 1] - pts[i]), 1.0)
            for i in range(pts.shape[0] - 1)
        ]
        return GPath(group, start, segs)


@dataclass
class LiftResult:
    status: str
    endpoint_g: object
    endpoint_m: tuple
    trace: list                     # [(t, g, m), ...] with t in [0, 1]
    escape_time: Optional[float] = None
    failed_segment: Optional[int] = None
    winding: Optional[float] = None   # signed turns of the tracked plane projection
    low_confidence: bool = False
    steps: int = 0

    @property
    def complete(self) -> bool:
        return self.status == COMPLETE


class _WindingTracker:
    """Unwrapped angle of a plane projection along the lift.

    Per-step jumps are folded into (-pi, pi]; any step that appears to rotate
    by >= pi/2 is subdivided on the step interpolant until jumps are small, so
    the fold is exact for trajectories the integrator resolves.
    """

    __slots__ = ("plane", "prev", "total")

    def __init__(self, plane: Callable, y0):
        self.plane = plane
        u, v = plane(y0)
        self.prev = math.atan2(v, u)
        self.total = 0.0

    @staticmethod
    def _fold(d: float) -> float:
        d = math.remainder(d, math.tau)
        if d == -math.pi:
            d = math.pi
        return d

    def _advance(self, interp, s0, th0, s1, depth) -> float:
        u, v = self.plane(interp(s1))
        th1 = math.atan2(v, u)
        d = self._fold(th1 - th0)
        if abs(d) >= math.pi / 2 and depth < 24:
            sm = 0.5 * (s0 + s1)
            thm = self._advance(interp, s0, th0, sm, depth + 1)
            return self._advance(interp, sm, thm, s1, depth + 1)
        self.total += d
        return th1

    def feed(self, interp, y_end):
        u, v = self.plane(y_end)
        th1 = math.atan2(v, u)
        d = self._fold(th1 - self.prev)
        if abs(d) < math.pi / 2:
            self.total += d
            self.prev = th1
        else:
            self.prev = self._advance(interp, 0.0, self.prev, 1.0, 0)


def _check_group_compat(action, path: GPath):
    g1, g2 = action.group, path.group
    if g1.kind != g2.kind or g1.dim != g2.dim:
        raise PathError("path group model does not match the action's group model")
    if g1.kind == "matrix" and not np.allclose(g1.basis, g2.basis):
        raise PathError("path and action use different matrix bases")


def lift_path(
    action,
    path: GPath,
    x0,
    cfg: Optional[IntegratorConfig] = None,
) -> LiftResult:
    """Lift a group path through the graph foliation starting over ``x0``.

    Integrates the lifting equation segment by segment (the group velocity is
    constant on each segment); the group component advances in closed form.
    Escape anywhere truncates the lift and reports the path time and segment.
    """
    cfg = cfg or IntegratorConfig()
    _check_group_compat(action, path)
    x0 = [float(v) for v in x0]
    action.require_inside(x0)

    tracker = None
    if action.winding_plane is not None:
        tracker = _WindingTracker(action.winding_plane, x0)

    rows: list = [(0.0, path.start, tuple(x0))]
    small_path = path.n_segments <= 8
    kept_steps: list = []  # (t_abs0, t_abs1, interp, seg_index) for padding
    margin = action._margin_unpacked
    y = x0
    steps_total = 0

    for k in range(path.n_segments):
        w = path.widths[k]
        t_base = path._bounds[k]
        rhs = action.rhs(path.velocity(k))
        seg_cfg = replace(
            cfg,
            initial_step=min(cfg.initial_step, w) if cfg.initial_step else w,
        )

        def on_step(t0, y0_, t1, y1, interp, _k=k, _tb=t_base, _w=w):
            if tracker is not None:
                tracker.feed(interp, y1)
            rows.append((_tb + t1, path.group_point(_k, t1 / _w), tuple(y1)))
            if small_path:
                kept_steps.append((_tb + t0, _tb + t1, interp, _k))

        status, t_end, y_end, steps, low = integrate_autonomous(
            rhs, y, w, seg_cfg, margin, on_step
        )
        steps_total += steps
        if status != COMPLETE:
            t_path = t_base + t_end
            frac = min(t_end / w, 1.0)
            result = LiftResult(
                status,
                path.group_point(k, frac),
                tuple(y_end),
                _padded_rows(rows, kept_steps, path, cfg) if small_path else rows,
                escape_time=t_path if status == ESCAPED else None,
                failed_segment=k,
                winding=tracker.total / math.tau if tracker else None,
                low_confidence=low,
                steps=steps_total,
            )
            return result
        y = list(y_end)

    return LiftResult(
        COMPLETE,
        path.endpoint(),
        tuple(y),
        _padded_rows(rows, kept_steps, path, cfg) if small_path else rows,
        winding=tracker.total / math.tau if tracker else None,
        steps=steps_total,
    )


def _padded_rows(rows, kept_steps, path: GPath, cfg: IntegratorConfig):
    """Densify traces of few-segment paths to at least cfg.trace_target rows."""
    if len(rows) >= cfg.trace_target + 1 or not kept_steps:
        return rows
    per = int(math.ceil(cfg.trace_target / len(kept_steps)))
    out = [rows[0]]
    for (t0, t1, interp, k) in kept_steps:
        w = path.widths[k]
        tb = path._bounds[k]
        for i in range(1, per + 1):
            s = i / per
            t = t0 + s * (t1 - t0)
            out.append((t, path.group_point(k, (t - tb) / w), tuple(interp(s))))
    out[-1] = rows[-1]
    return out


def gamma(action, path: GPath, probes: Sequence, cfg: Optional[IntegratorConfig] = None):
    """Lift the same group path from several starting points.

    Returns ``[(probe, LiftResult), ...]`` in the input order; escapes are
    reported per probe rather than aborting the batch.
    """
    out = []
    for p in probes:
        out.append((tuple(float(v) for v in p), lift_path(action, path, p, cfg)))
    return out


def equivariance_check(
    action,
    path: GPath,
    x0,
    g,
    cfg: Optional[IntegratorConfig] = None,
) -> float:
    """Residual of the leaf translation law under left-translating the path.

    Lifts ``path`` and its left-translate by ``g`` from the same ``x0``; the
    manifold endpoints must agree and the group endpoints must differ by left
    multiplication by ``g``.  Raises :class:`LiftEscapedError` on escape.
    """
    base = lift_path(action, path, x0, cfg)
    if not base.complete:
        raise LiftEscapedError(base)
    translated = GPath(path.group, action.group.mul(g, path.start), path.segments)
    shifted = lift_path(action, translated, x0, cfg)
    if not shifted.complete:
        raise LiftEscapedError(shifted)
    dm = 0.0
    for a, b in zip(base.endpoint_m, shifted.endpoint_m):
        dm = max(dm, abs(a - b))
    dg = action.group.distance(
        action.group.mul(g, base.endpoint_g), shifted.endpoint_g
    )
    return dm + dg
