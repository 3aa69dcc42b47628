"""Dynamical-map machinery.

Everything here revolves around the reduced dynamical map

    E_{t,t0}: vec(rho_S(t0)) -> vec(rho_S(t)) = Tr_env exp(L (t-t0)) [rho_S (x) rho_env]

of a time-independent composite Liouvillian.  Its time-local form
E_{t+dt,t} = E_{t+dt,t0} E_{t,t0}^[-1] becomes stationary once t exceeds
the environment memory time; the stationary map's biorthogonal
eigendecomposition then extends the dynamics to arbitrary durations in
closed form and supplies the intermediate maps that glue factorized
correlator segments together.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import (
    DefectiveMapError,
    DimensionError,
    IllConditionedMapError,
    ResourceCapError,
    ValidationError,
)
from .liouville import (
    LiouvilleSpace,
    SuperOperator,
    env_injection_matrix,
    env_trace_matrix,
)

# composite Liouville dimension cap (desk scale): (D * D_E)^2
COMPOSITE_CAP = 1024

# condition-number cap for dynamical-map inverses
INVERSE_COND_CAP = 1e12

# eigenvector-matrix conditioning beyond which a map counts as defective
DEFECTIVE_COND_CAP = 1e10


class CompositePropagator:
    """Eigendecomposition of a composite Liouvillian, reused across times.

    Provides exact propagation of composite Liouville vectors for
    arbitrary real durations and the reduced dynamical map
    T exp(L t) J, where J injects the model's initial environment state
    and T traces it out.  Falls back to scaling-and-squaring ``expm``
    when the eigenvector matrix is too ill-conditioned to trust.
    """

    def __init__(self, model):
        space = model.space
        if space.size > COMPOSITE_CAP:
            raise ResourceCapError(
                f"composite Liouville dimension {space.size} exceeds cap {COMPOSITE_CAP}"
            )
        self.space = space
        self.generator = model.liouvillian_matrix
        self.eigvals, vr = np.linalg.eig(self.generator)
        self.eig_cond = np.linalg.cond(vr)
        self._vr = vr
        self._vl = np.linalg.inv(vr)
        self.use_eig = self.eig_cond < 1e8
        self.inject = env_injection_matrix(model.env_initial, space.dim_system)
        self.reduce = env_trace_matrix(space.dim_system, space.dim_env)
        # premultiplied factors for fast reduced maps
        self._tr_vr = self.reduce @ vr
        self._vl_inj = self._vl @ self.inject
        self._step_cache = {}

    def evolve(self, duration, block):
        """Apply exp(L * duration) to a vector or a block of column vectors."""
        if duration == 0.0:
            return np.array(block, dtype=complex)
        if self.use_eig:
            phases = np.exp(self.eigvals * duration)
            return self._vr @ (phases[:, None] * (self._vl @ block)) if block.ndim == 2 \
                else self._vr @ (phases * (self._vl @ block))
        return self.step_matrix(duration) @ block

    def step_matrix(self, duration):
        """Dense exp(L * duration), cached per duration."""
        key = float(duration)
        if key not in self._step_cache:
            self._step_cache[key] = expm(self.generator * key)
        return self._step_cache[key]

    def reduced_map(self, duration):
        """The reduced dynamical map for one duration (D^2 x D^2)."""
        if self.use_eig:
            phases = np.exp(self.eigvals * duration)
            return self._tr_vr @ (phases[:, None] * self._vl_inj)
        return self.reduce @ (self.step_matrix(duration) @ self.inject)

    def reduced_map_grid(self, times):
        """Reduced maps at many times, shape (len(times), D^2, D^2)."""
        times = np.asarray(times, dtype=float)
        if self.use_eig:
            phases = np.exp(np.multiply.outer(times, self.eigvals))
            return np.einsum("ak,tk,kb->tab", self._tr_vr, phases, self._vl_inj)
        return np.stack([self.reduced_map(t) for t in times])


_PROPAGATOR_CACHE = {}


def get_propagator(model):
    """Shared :class:`CompositePropagator` for a model (built once)."""
    key = model.content_hash
    prop = _PROPAGATOR_CACHE.get(key)
    if prop is None:
        prop = CompositePropagator(model)
        _PROPAGATOR_CACHE[key] = prop
    return prop


@dataclass(frozen=True, eq=False)
class DynamicalMap:
    """Reduced-system map tagged with its time interval and environment."""

    superop: SuperOperator
    t_start: float
    t_end: float
    env_state_hash: str

    @property
    def matrix(self):
        return self.superop.matrix

    @property
    def duration(self):
        return self.t_end - self.t_start


@dataclass(eq=False)
class MemoryTimeEstimate:
    """Result of the stationarity scan of adjacent time-local maps."""

    tau_c: float
    threshold: float
    dt: float
    converged: bool
    norm_history: np.ndarray = field(repr=False)


@dataclass(eq=False)
class SpectralDecomposition:
    """Biorthogonal eigendata of the stationary time-local map.

    ``rates[k]`` is z_k = log(mu_k)/dt (principal branch) for eigenvalue
    mu_k of the stationary one-step map; ``right[:, k]`` and
    ``left[k, :]`` satisfy left @ right = identity, so
    ``right @ diag(exp(rates*d)) @ left`` propagates the reduced system
    for an arbitrary real duration d.  ``steady_index`` marks the unique
    zero rate; the corresponding right vector is trace-normalized.
    """

    rates: np.ndarray
    right: np.ndarray
    left: np.ndarray
    dt: float
    steady_index: int
    eig_cond: float

    def propagator(self, duration):
        """Stationary-map propagator for one real duration (D^2 x D^2)."""
        phases = np.exp(self.rates * duration)
        return self.right @ (phases[:, None] * self.left)

    def propagator_grid(self, durations):
        durations = np.asarray(durations, dtype=float)
        phases = np.exp(np.multiply.outer(durations, self.rates))
        return np.einsum("ak,tk,kb->tab", self.right, phases, self.left)

    @property
    def steady_state(self):
        """Trace-normalized steady state as a Liouville vector."""
        return self.right[:, self.steady_index].copy()

    def near_zero_rates(self, tol=1e-10):
        return np.flatnonzero(np.abs(self.rates) < tol)


def propagate_map(model, t_start, t_end, propagator=None):
    """Brute-force reduced dynamical map E_{t_end, t_start}."""
    if t_end < t_start:
        raise ValidationError(f"t_end {t_end} must not precede t_start {t_start}")
    prop = propagator or get_propagator(model)
    matrix = prop.reduced_map(t_end - t_start)
    return DynamicalMap(
        superop=SuperOperator(matrix, model.space.system()),
        t_start=t_start,
        t_end=t_end,
        env_state_hash=model.env_hash,
    )


def time_local_map(e_later, e_earlier, cond_cap=INVERSE_COND_CAP):
    """E_{t+dt,t} = E_{t+dt,t0} E_{t,t0}^[-1] for maps sharing t0."""
    if e_later.t_start != e_earlier.t_start:
        raise ValidationError(
            f"maps must share t_start, got {e_later.t_start} and {e_earlier.t_start}"
        )
    if e_later.env_state_hash != e_earlier.env_state_hash:
        raise ValidationError("maps presume different initial environment states")
    cond = np.linalg.cond(e_earlier.matrix)
    if cond > cond_cap:
        raise IllConditionedMapError("short-time map is not reliably invertible", cond)
    # X = A B^-1  solved as  B^T X^T = A^T
    mat = np.linalg.solve(e_earlier.matrix.T, e_later.matrix.T).T
    return SuperOperator(mat, e_later.superop.space)


def _time_local_sequence(maps):
    """Batched E_{(k+1)dt, k dt} from a stack of maps E_{k dt, 0}."""
    return np.linalg.solve(maps[:-1].transpose(0, 2, 1), maps[1:].transpose(0, 2, 1)).transpose(0, 2, 1)


def estimate_memory_time(model, dt, threshold, t_max, propagator=None):
    """Scan adjacent time-local maps for stationarity.

    Returns the smallest grid time after which all subsequent
    time-local maps of adjacent steps differ by less than ``threshold``
    in the Frobenius norm (checked up to ``t_max``), rounded up to the
    dt grid.  ``converged`` is False when the tail never settles.
    """
    if threshold <= 0:
        raise ValidationError("stationarity threshold must be positive")
    if t_max <= 2 * dt:
        raise ValidationError("t_max must cover at least a few steps")
    prop = propagator or get_propagator(model)
    nsteps = int(np.ceil(t_max / dt))
    maps = prop.reduced_map_grid(dt * np.arange(nsteps + 1))
    tl = _time_local_sequence(maps)
    diffs = np.linalg.norm(tl[1:] - tl[:-1], axis=(1, 2))
    # diffs[k-1] compares the time-local map at t = k*dt with the one at (k-1)*dt
    above = np.flatnonzero(diffs >= threshold)
    if diffs.size == 0:
        raise ValidationError("t_max too small to form a single comparison")
    if above.size and above[-1] == diffs.size - 1:
        return MemoryTimeEstimate(
            tau_c=float("nan"), threshold=threshold, dt=dt, converged=False,
            norm_history=diffs,
        )
    last_bad = int(above[-1]) + 1 if above.size else 0
    tau_c = (last_bad + 1) * dt
    return MemoryTimeEstimate(
        tau_c=tau_c, threshold=threshold, dt=dt, converged=True, norm_history=diffs
    )


def stationary_map(model, tau_c, dt, propagator=None):
    """E^S_dt, the time-local map at the memory time."""
    prop = propagator or get_propagator(model)
    later = propagate_map(model, 0.0, tau_c + dt, prop)
    earlier = propagate_map(model, 0.0, tau_c, prop)
    superop = time_local_map(later, earlier)
    return DynamicalMap(
        superop=superop, t_start=tau_c, t_end=tau_c + dt, env_state_hash=model.env_hash
    )


def spectral(stationary, alias_margin=1e-3):
    """Biorthogonal spectral decomposition of a stationary map.

    Rates take the principal branch of log(mu)/dt; eigenvalues too close
    to the branch cut (|Im log mu| near pi) trigger an aliasing error
    suggesting a smaller dt.  Exactly one rate must vanish (the steady
    state); its right vector is normalized to unit trace.
    """
    dt = stationary.duration
    mat = stationary.matrix
    mu, vr = np.linalg.eig(mat)
    if np.any(np.abs(mu) > 1.0 + 1e-8):
        worst = np.max(np.abs(mu))
        raise ValidationError(
            f"stationary map has eigenvalue of modulus {worst:.12f} > 1: "
            "positivity/stability violation"
        )
    cond = np.linalg.cond(vr)
    if cond > DEFECTIVE_COND_CAP:
        raise DefectiveMapError(
            f"eigenvector matrix condition number {cond:.3e} exceeds "
            f"{DEFECTIVE_COND_CAP:.0e}; the map is numerically defective — "
            "try a different dt"
        )
    logs = np.log(mu)
    if np.any(np.abs(logs.imag) > np.pi * (1.0 - alias_margin)):
        raise ValidationError(
            "eigenvalue phase too close to the principal-branch cut "
            "(|Im z| dt ~ pi): reduce dt to avoid rate aliasing"
        )
    rates = logs / dt
    steady = int(np.argmin(np.abs(rates)))
    if abs(rates[steady]) > 1e-10:
        raise ValidationError(
            f"no stationary rate found: smallest |z| = {abs(rates[steady]):.3e}"
        )
    rates = rates.copy()
    rates[steady] = 0.0
    dim = int(round(np.sqrt(mat.shape[0])))
    trace_of_steady = np.sum(vr[:: dim + 1, steady])
    if abs(trace_of_steady) < 1e-12:
        raise ValidationError("steady-state candidate has vanishing trace")
    vr = vr.copy()
    vr[:, steady] = vr[:, steady] / trace_of_steady
    left = np.linalg.inv(vr)
    return SpectralDecomposition(
        rates=rates, right=vr, left=left, dt=dt, steady_index=steady, eig_cond=cond
    )


def intermediate_map(e_short, spectral_data, delta_tau, allow_short=False,
                     cond_cap=INVERSE_COND_CAP):
    """Connector between factorized segments separated by delta_tau.

    Returns E_{tau_c,0}^[-1] E^S_{delta_tau - tau_c} where tau_c is the
    duration of ``e_short``.  The stationary part is evaluated in
    eigenform, so delta_tau need not lie on any grid.  delta_tau below
    tau_c is a domain error unless ``allow_short`` (used only to probe
    the sharpness of the memory-time condition).
    """
    tau_c = e_short.duration
    if delta_tau < tau_c - 1e-12 and not allow_short:
        raise ValidationError(
            f"intermediate map needs delta_tau >= tau_c ({tau_c}), got {delta_tau}"
        )
    cond = np.linalg.cond(e_short.matrix)
    if cond > cond_cap:
        raise IllConditionedMapError("short-time map inverse rejected", cond)
    return np.linalg.solve(e_short.matrix, spectral_data.propagator(delta_tau - tau_c))


def extrapolate_map(e_short, spectral_data, t):
    """Extrapolated map E_{t,t0} = E^S_{t - t0 - tau_c} E_{t0+tau_c,t0}."""
    t0 = e_short.t_start
    tau_c = e_short.duration
    if t < t0 + tau_c - 1e-12:
        raise ValidationError(
            f"extrapolation needs t >= t0 + tau_c = {t0 + tau_c}, got {t}"
        )
    matrix = spectral_data.propagator(t - t0 - tau_c) @ e_short.matrix
    return DynamicalMap(
        superop=SuperOperator(matrix, e_short.superop.space),
        t_start=t0,
        t_end=t,
        env_state_hash=e_short.env_state_hash,
    )


@dataclass(eq=False)
class FactorizationData:
    """Everything the factorization engine needs about one model.

    Bundles the memory-time estimate, the short-time map E_{tau_c,0} and
    its inverse, and the spectral decomposition of the stationary map.
    ``eigencount`` is a diagnostic: the number of composite-Liouvillian
    eigenmodes still contributing more than 1e-10 at tau_c.
    """

    model: object
    dt: float
    threshold: float
    memory: MemoryTimeEstimate
    e_tauc: DynamicalMap
    e_tauc_inv: np.ndarray
    e_tauc_cond: float
    spec: SpectralDecomposition
    eigencount: int

    @property
    def tau_c(self):
        return self.memory.tau_c

    @property
    def propagator(self):
        return get_propagator(self.model)


def _surviving_eigencount(prop, tau_c, tol=1e-10):
    """Composite eigenmodes with weight above tol at tau_c, any basis start."""
    decay = np.exp(prop.eigvals.real * tau_c)
    inject_weight = np.max(np.abs(prop._vl_inj), axis=1)
    emit_weight = np.linalg.norm(prop._tr_vr, axis=0)
    return int(np.sum(decay * inject_weight * emit_weight > tol))


def build_factorization_data(model, dt, threshold=1e-12, t_max=None):
    """Detect the memory time and assemble factorization inputs."""
    if t_max is None:
        raise ValidationError("t_max is required (upper bound for the memory-time scan)")
    prop = get_propagator(model)
    memory = estimate_memory_time(model, dt, threshold, t_max, prop)
    if not memory.converged:
        raise ValidationError(
            "time-local maps did not become stationary by "
            f"t_max={t_max}: smallest adjacent difference "
            f"{memory.norm_history.min():.3e} vs threshold {threshold:.1e}"
        )
    e_tauc = propagate_map(model, 0.0, memory.tau_c, prop)
    cond = np.linalg.cond(e_tauc.matrix)
    if cond > INVERSE_COND_CAP:
        raise IllConditionedMapError("E_{tau_c,0} is not invertible at working precision", cond)
    e_tauc_inv = np.linalg.inv(e_tauc.matrix)
    spec = spectral(stationary_map(model, memory.tau_c, dt, prop))
    return FactorizationData(
        model=model,
        dt=dt,
        threshold=threshold,
        memory=memory,
        e_tauc=e_tauc,
        e_tauc_inv=e_tauc_inv,
        e_tauc_cond=cond,
        spec=spec,
        eigencount=_surviving_eigencount(prop, memory.tau_c),
    )
