"""Multitime correlator engines.

Three evaluation routes for the same correlator specification:

- ``brute_force_correlator``: exact propagation on the full composite
  Liouville space, applying every intervention at its time.  The
  exactness oracle; cost grows with the total spanned time.
- ``factorized_correlator``: splits the correlator at gaps exceeding the
  memory time into short unfactorizable segments, each re-started from
  an uncorrelated system (x) environment state, glued together by
  intermediate maps built from the stationary-map eigendecomposition.
  Exact whenever all cut gaps are at least the memory time.
- ``qrt_correlator``: conventional regression — propagates a
  system-only correlation vector with the reduced dynamical map between
  interventions, ignoring system-environment correlations at
  intervention times.  Exact only in the Markovian limit.

A correlator is an ordered list of instantaneous interventions (operator
sandwiches A . rho . B^dag, or finite-duration pulse unitaries) applied
to either a fixed initial state with a final measurement functional
(scalar mode) or the full operator basis (map mode).
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ValidationError
from .liouville import embed_composite, vectorize
from .maps import DynamicalMap, SuperOperator, get_propagator

GRID_TOL = 1e-9


class PropagationStats:
    """Accumulates explicitly propagated composite temporal volume.

    ``volume`` counts (duration x propagated columns / D^2) so that one
    full-map propagation over a window counts the window length once and
    a single-trajectory propagation counts D^2 times less.
    """

    def __init__(self):
        self.volume = 0.0
        self.calls = 0

    def record(self, duration, columns, dim_basis):
        self.volume += abs(duration) * columns / dim_basis
        self.calls += 1


def _array_digest(*arrays):
    h = hashlib.sha256()
    for a in arrays:
        if a is None:
            h.update(b"none")
        else:
            a = np.ascontiguousarray(np.asarray(a, dtype=complex))
            h.update(a.tobytes())
            h.update(str(a.shape).encode())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class Intervention:
    """Instantaneous superoperator inserted into a correlator.

    Either an operator sandwich rho -> A rho B^dag built from system
    operators (zero duration), or a finite-duration pulse carried as a
    composite unitary.  The recorded duration of a pulse enters the
    factorization bookkeeping: it prolongs the relaxation window after
    the event from tau_c to tau_c + duration.
    """

    kind: str
    duration: float = 0.0
    left: np.ndarray = None
    right: np.ndarray = None
    unitary: np.ndarray = None
    label: str = ""

    def __post_init__(self):
        if self.kind == "sandwich":
            if self.duration != 0.0:
                raise ValidationError("sandwich interventions have zero duration")
            a = np.asarray(self.left, dtype=complex)
            b = a if self.right is None else np.asarray(self.right, dtype=complex)
            if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != a.shape:
                raise DimensionError("sandwich operators must be square and equal-shaped")
            object.__setattr__(self, "left", a)
            object.__setattr__(self, "right", b)
        elif self.kind == "pulse":
            if self.duration <= 0.0:
                raise ValidationError("pulse interventions carry a positive duration")
            u = np.asarray(self.unitary, dtype=complex)
            if u.ndim != 2 or u.shape[0] != u.shape[1]:
                raise DimensionError("pulse unitary must be square")
            object.__setattr__(self, "unitary", u)
        else:
            raise ValidationError(f"unknown intervention kind {self.kind!r}")

    @classmethod
    def sandwich(cls, left, right=None, label=""):
        return cls(kind="sandwich", left=left, right=right, label=label)

    @classmethod
    def left_multiplication(cls, op, label=""):
        """rho -> op rho  (sandwich with B = identity)."""
        op = np.asarray(op, dtype=complex)
        return cls(kind="sandwich", left=op, right=np.eye(op.shape[0]), label=label)

    def composite_superop(self, space):
        """Superoperator on the composite Liouville space."""
        if self.kind == "sandwich":
            if self.left.shape[0] != space.dim_system:
                raise DimensionError(
                    f"system operator of dim {self.left.shape[0]} does not match "
                    f"model system dim {space.dim_system}"
                )
            eye_env = np.eye(space.dim_env)
            a = embed_composite(self.left, eye_env)
            b = embed_composite(self.right, eye_env)
            return np.kron(b.conj(), a)
        if self.unitary.shape[0] != space.dim:
            raise DimensionError(
                f"pulse unitary of dim {self.unitary.shape[0]} does not match "
                f"composite dim {space.dim}"
            )
        return np.kron(self.unitary.conj(), self.unitary)

    def system_superop(self, propagator):
        """Reduced action on the system Liouville space.

        For a pulse this is the fresh-environment reduced map
        T (U . U^dag) J, which is what the regression engine uses.
        """
        if self.kind == "sandwich":
            return np.kron(self.right.conj(), self.left)
        return propagator.reduce @ (
            np.kron(self.unitary.conj(), self.unitary) @ propagator.inject
        )

    @property
    def signature(self):
        return _array_digest(self.left, self.right, self.unitary) + f":{self.duration:.12e}"


@dataclass(frozen=True, eq=False)
class CorrelatorSpec:
    """Ordered event list defining an n-time correlator.

    Scalar mode: ``rho0`` and ``measure`` both given; the result is
    trace(measure . final state).  Map mode: both omitted; the result is
    the full system map assembled from all basis initial states.
    """

    t_start: float
    events: tuple
    t_final: float
    rho0: np.ndarray = None
    measure: np.ndarray = None

    def __post_init__(self):
        events = tuple((float(t), iv) for t, iv in self.events)
        object.__setattr__(self, "events", events)
        times = [self.t_start] + [t for t, _ in events] + [self.t_final]
        durations = [0.0] + [iv.duration for _, iv in events] + [0.0]
        for j in range(1, len(times)):
            if times[j] <= times[j - 1] + GRID_TOL and not (
                times[j] > times[j - 1]
            ):
                raise ValidationError(
                    f"correlator times must be strictly increasing, got {times}"
                )
            if times[j] < times[j - 1] + durations[j - 1] - GRID_TOL:
                raise ValidationError(
                    f"event at t={times[j]} overlaps the pulse ending at "
                    f"{times[j - 1] + durations[j - 1]}"
                )
        if (self.rho0 is None) != (self.measure is None):
            raise ValidationError(
                "provide both rho0 and measure (scalar mode) or neither (map mode)"
            )
        if self.rho0 is not None:
            object.__setattr__(self, "rho0", np.asarray(self.rho0, dtype=complex))
            object.__setattr__(self, "measure", np.asarray(self.measure, dtype=complex))

    @property
    def scalar_mode(self):
        return self.rho0 is not None

    @property
    def node_times(self):
        return [self.t_start] + [t for t, _ in self.events] + [self.t_final]

    @property
    def node_durations(self):
        return [0.0] + [iv.duration for _, iv in self.events] + [0.0]

    def gaps(self):
        """Free-evolution gap before each node j = 1..n (pulse ends excluded)."""
        times, durs = self.node_times, self.node_durations
        return [times[j] - (times[j - 1] + durs[j - 1]) for j in range(1, len(times))]


@dataclass(frozen=True, eq=False)
class Segment:
    """One unfactorizable window, propagated brute force on the composite."""

    t_begin: float
    t_end: float
    events: tuple
    is_first: bool
    is_last: bool

    @property
    def span(self):
        return self.t_end - self.t_begin


@dataclass(frozen=True, eq=False)
class FactorizationPlan:
    """Cut structure of a correlator: segments plus connector durations.

    ``connector_durations[k]`` is the stationary-map duration of the
    intermediate map between segment k and segment k+1 (the full
    connector is E_{tau_c}^[-1] E^S_{duration}).
    """

    spec: CorrelatorSpec
    tau_c: float
    cut_indices: tuple
    segments: tuple
    connector_durations: tuple


def plan_factorization(spec, tau_c, cuts=None, allow_short=False):
    """Cut a correlator at every gap of at least tau_c.

    A gap is measured from the end of any pulse at the earlier event.
    ``cuts`` overrides the automatic choice (indices j = 1..n of the gap
    before node j); a forced cut with gap below tau_c requires
    ``allow_short`` and yields a negative stationary-map duration (used
    to probe the sharpness of the memory-time condition).
    """
    times = spec.node_times
    durs = spec.node_durations
    gaps = spec.gaps()
    n = len(gaps)
    if cuts is None:
        cuts = [j for j in range(1, n + 1) if gaps[j - 1] >= tau_c * (1.0 - 1e-12)]
    else:
        cuts = sorted(set(int(j) for j in cuts))
        if cuts and (cuts[0] < 1 or cuts[-1] > n):
            raise ValidationError(f"cut indices must lie in 1..{n}, got {cuts}")
    connector_durations = []
    for j in cuts:
        es = gaps[j - 1] - tau_c
        if es < -GRID_TOL and not allow_short:
            raise ValidationError(
                f"cut at gap {gaps[j - 1]:.6g} < tau_c {tau_c:.6g} requires allow_short"
            )
        connector_durations.append(es)
    bounds = [0] + list(cuts) + [n + 1]
    segments = []
    for s in range(len(bounds) - 1):
        p, q = bounds[s], bounds[s + 1] - 1
        is_first = p == 0
        is_last = q == n
        t_begin = times[p] if is_first else times[p] - tau_c
        t_end = times[n] if is_last else times[q] + durs[q] + tau_c
        # event node indices run 1..len(events); clamp to the segment's node range
        seg_events = tuple(
            (t, iv)
            for idx, (t, iv) in enumerate(spec.events, start=1)
            if max(p, 1) <= idx <= min(q, len(spec.events))
        )
        segments.append(
            Segment(t_begin=t_begin, t_end=t_end, events=seg_events,
                    is_first=is_first, is_last=is_last)
        )
    return FactorizationPlan(
        spec=spec,
        tau_c=tau_c,
        cut_indices=tuple(cuts),
        segments=tuple(segments),
        connector_durations=tuple(connector_durations),
    )


def _measure_row(measure):
    """Row vector r with r @ vec(rho) = trace(measure @ rho)."""
    return vectorize(np.asarray(measure, dtype=complex).T)


def _finish(spec, total, model):
    if spec.scalar_mode:
        return complex(_measure_row(spec.measure) @ (total @ vectorize(spec.rho0)))
    return DynamicalMap(
        superop=SuperOperator(total, model.space.system()),
        t_start=spec.t_start,
        t_end=spec.t_final,
        env_state_hash=model.env_hash,
    )


def brute_force_correlator(model, spec, stats=None):
    """Exact correlator by full composite-space propagation."""
    prop = get_propagator(model)
    space = model.space
    block = prop.inject.copy()
    cursor = spec.t_start
    for t, iv in spec.events:
        block = prop.evolve(t - cursor, block)
        block = iv.composite_superop(space) @ block
        cursor = t
    block = prop.evolve(spec.t_final - cursor, block)
    if stats is not None:
        stats.record(spec.t_final - spec.t_start, block.shape[1], space.dim_system ** 2)
    total = prop.reduce @ block
    return _finish(spec, total, model)


def segment_map(model, segment, cache=None, stats=None):
    """Reduced map of one unfactorizable segment (composite brute force).

    Segments with identical relative event structure share one
    evaluation through ``cache`` (time-independent generator, so only
    offsets relative to the segment start matter).
    """
    prop = get_propagator(model)
    key = None
    if cache is not None:
        key = (
            model.content_hash,
            round(segment.span, 10),
            tuple(
                (round(t - segment.t_begin, 10), iv.signature) for t, iv in segment.events
            ),
        )
        hit = cache.get(key)
        if hit is not None:
            return hit
    space = model.space
    block = prop.inject.copy()
    cursor = segment.t_begin
    for t, iv in segment.events:
        block = prop.evolve(t - cursor, block)
        block = iv.composite_superop(space) @ block
        cursor = t
    block = prop.evolve(segment.t_end - cursor, block)
    out = prop.reduce @ block
    if stats is not None:
        stats.record(segment.span, block.shape[1], space.dim_system ** 2)
    if cache is not None:
        cache[key] = out
    return out


def connector_map(fdata, es_duration):
    """Intermediate map E_{tau_c}^[-1] E^S_{es_duration} between segments."""
    return fdata.e_tauc_inv @ fdata.spec.propagator(es_duration)


def factorized_correlator(model, plan, fdata, cache=None, stats=None):
    """Correlator assembled from segment maps and intermediate maps."""
    seg_maps = [segment_map(model, seg, cache=cache, stats=stats) for seg in plan.segments]
    total = seg_maps[0]
    for k, es in enumerate(plan.connector_durations):
        total = seg_maps[k + 1] @ (connector_map(fdata, es) @ total)
    return _finish(plan.spec, total, model)


def qrt_correlator(model, spec, fdata=None, stats=None):
    """Regression-theorem correlator: reduced-map legs, system interventions.

    Each leg of duration d is propagated with the exact reduced
    dynamical map E_d (fresh environment at the start of every leg),
    which is the regression prescription; environment correlations
    carried across interventions are discarded.
    """
    prop = get_propagator(model)
    dim2 = model.space.dim_system ** 2
    block = np.eye(dim2, dtype=complex)
    cursor = spec.t_start
    for t, iv in spec.events:
        block = prop.reduced_map(t - cursor) @ block
        block = iv.system_superop(prop) @ block
        cursor = t
    total = prop.reduced_map(spec.t_final - cursor) @ block
    if stats is not None:
        stats.record(0.0, 0, dim2)
    return _finish(spec, total, model)
