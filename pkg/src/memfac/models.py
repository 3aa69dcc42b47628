"""Physical scenario builders.

The workhorse scenario is a driven two-level system coupled to one
damped, truncated bosonic mode.  The mode plus its damping act as a
configurable Markovian embedding: the composite evolution is generated
by a time-independent GKSL Liouvillian, while the reduced two-level
dynamics is non-Markovian with a finite, tunable memory time.

Units: energies in meV, times in ps, rates in 1/ps; all Hamiltonians are
written in the frame rotating at the drive/pulse carrier so that cw
driving leaves the composite generator time-independent.
"""

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erf

from .constants import HBAR, KB
from .correlators import Intervention
from .errors import RefinementError, ValidationError
from .liouville import LiouvilleSpace, embed_composite, liouvillian

SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T
EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
GROUND = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
SIGMA_X = SIGMA_MINUS + SIGMA_PLUS


def destroy(dim):
    """Bosonic annihilation operator truncated to ``dim`` levels."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def number(dim):
    return np.diag(np.arange(dim)).astype(complex)


def thermal_occupation(energy, temperature):
    """Bose occupation of a mode of the given energy (meV) at T (K)."""
    if temperature <= 0.0 or energy <= 0.0:
        return 0.0
    return 1.0 / np.expm1(energy / (KB * temperature))


def thermal_state(dim, energy, temperature):
    """Truncated thermal density matrix of a bosonic mode."""
    if temperature <= 0.0:
        rho = np.zeros((dim, dim), dtype=complex)
        rho[0, 0] = 1.0
        return rho
    weights = np.exp(-np.arange(dim) * energy / (KB * temperature))
    return np.diag(weights / weights.sum()).astype(complex)


@dataclass(frozen=True, eq=False)
class EmbeddingModel:
    """System + auxiliary environment with a time-independent generator."""

    dim_system: int
    dim_env: int
    h0: np.ndarray
    lindblad_terms: tuple
    env_initial: np.ndarray
    coupling: float = 0.0
    label: str = ""
    warnings: tuple = ()

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=complex)
        env = np.asarray(self.env_initial, dtype=complex)
        if h0.shape != (self.dim_system * self.dim_env,) * 2:
            raise ValidationError(
                f"h0 shape {h0.shape} does not match composite dim "
                f"{self.dim_system * self.dim_env}"
            )
        if env.shape != (self.dim_env, self.dim_env):
            raise ValidationError("env_initial must be dim_env x dim_env")
        evals = np.linalg.eigvalsh(env)
        if evals.min() < -1e-12:
            raise ValidationError(
                f"env_initial is not positive semidefinite (min eigenvalue {evals.min():.2e})"
            )
        if abs(np.trace(env) - 1.0) > 1e-12:
            raise ValidationError(f"env_initial trace is {np.trace(env)}, expected 1")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "env_initial", env)
        object.__setattr__(
            self,
            "lindblad_terms",
            tuple((float(r), np.asarray(op, dtype=complex)) for r, op in self.lindblad_terms),
        )

    @cached_property
    def space(self):
        return LiouvilleSpace(self.dim_system, self.dim_env)

    @cached_property
    def liouvillian_matrix(self):
        return liouvillian(self.h0, self.lindblad_terms, space=self.space).matrix

    @cached_property
    def content_hash(self):
        h = hashlib.sha256()
        h.update(f"{self.dim_system}:{self.dim_env}".encode())
        h.update(np.ascontiguousarray(self.h0).tobytes())
        for rate, op in self.lindblad_terms:
            h.update(np.float64(rate).tobytes())
            h.update(np.ascontiguousarray(op).tobytes())
        h.update(np.ascontiguousarray(self.env_initial).tobytes())
        return h.hexdigest()

    @cached_property
    def env_hash(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.env_initial).tobytes())
        h.update(str(self.dim_env).encode())
        return h.hexdigest()[:16]


def build_tls_boson_model(
    dim_env,
    coupling,
    mode_energy,
    mode_damping,
    radiative_decay,
    rabi=0.0,
    detuning=0.0,
    temperature=0.0,
    coupling_form="diagonal",
):
    """Two-level system coupled to one damped truncated bosonic mode.

    Parameters
    ----------
    dim_env : int
        Mode truncation (>= 2).
    coupling : float
        TLS-mode coupling energy g in meV.  ``coupling_form="diagonal"``
        couples through sigma+ sigma- (x) (b + b^dag), giving
        independent-boson-like sidebands; ``"jc"`` gives the rotating
        exchange coupling sigma+ (x) b + h.c.
    mode_energy : float
        Mode quantum (meV).
    mode_damping, radiative_decay : float
        kappa and gamma in 1/ps.  Finite temperature adds the thermal
        upward damping channel so the initial thermal mode state is
        stationary for the bare environment.
    rabi, detuning : float
        cw drive energy (hbar Omega_0) and TLS detuning from the carrier,
        both in meV.
    """
    if dim_env < 2:
        raise ValidationError("dim_env must be at least 2 (use build_tls_lindblad_model"
                              " for a memoryless reference)")
    if min(mode_damping, radiative_decay) < 0:
        raise ValidationError("rates must be nonnegative")
    if temperature < 0:
        raise ValidationError("temperature must be nonnegative")
    if mode_energy <= 0:
        raise ValidationError("mode_energy must be positive")

    b = destroy(dim_env)
    eye_env = np.eye(dim_env)
    h0 = (
        detuning * embed_composite(EXCITED, eye_env)
        + 0.5 * rabi * embed_composite(SIGMA_X, eye_env)
        + mode_energy * embed_composite(np.eye(2), number(dim_env))
    )
    if coupling_form == "diagonal":
        h0 = h0 + coupling * embed_composite(EXCITED, b + b.conj().T)
    elif coupling_form == "jc":
        h0 = h0 + coupling * (
            embed_composite(SIGMA_PLUS, b) + embed_composite(SIGMA_MINUS, b.conj().T)
        )
    else:
        raise ValidationError(f"unknown coupling_form {coupling_form!r}")

    nbar = thermal_occupation(mode_energy, temperature)
    terms = []
    if radiative_decay > 0:
        terms.append((radiative_decay, embed_composite(SIGMA_MINUS, eye_env)))
    if mode_damping > 0:
        terms.append((mode_damping * (nbar + 1.0), embed_composite(np.eye(2), b)))
        if nbar > 0:
            terms.append((mode_damping * nbar, embed_composite(np.eye(2), b.conj().T)))

    warnings = ()
    if nbar > dim_env / 4.0:
        warnings = (
            f"thermal occupation {nbar:.3f} needs population beyond the "
            f"truncation dim_env={dim_env}",
        )
    label = (
        f"tls-boson(dE={dim_env},g={coupling},wm={mode_energy},k={mode_damping},"
        f"gam={radiative_decay},O={rabi},d={detuning},T={temperature},{coupling_form})"
    )
    return EmbeddingModel(
        dim_system=2,
        dim_env=dim_env,
        h0=h0,
        lindblad_terms=tuple(terms),
        env_initial=thermal_state(dim_env, mode_energy, temperature),
        coupling=coupling,
        label=label,
        warnings=warnings,
    )


def build_tls_lindblad_model(radiative_decay, rabi=0.0, detuning=0.0, dephasing=0.0):
    """Memoryless reference: a bare driven TLS (dim_env = 1, pure Lindblad)."""
    if min(radiative_decay, dephasing) < 0:
        raise ValidationError("rates must be nonnegative")
    h0 = detuning * EXCITED + 0.5 * rabi * SIGMA_X
    terms = []
    if radiative_decay > 0:
        terms.append((radiative_decay, SIGMA_MINUS.copy()))
    if dephasing > 0:
        terms.append((dephasing, EXCITED.copy()))
    return EmbeddingModel(
        dim_system=2,
        dim_env=1,
        h0=h0,
        lindblad_terms=tuple(terms),
        env_initial=np.eye(1, dtype=complex),
        coupling=0.0,
        label=f"tls-lindblad(gam={radiative_decay},O={rabi},d={detuning},dp={dephasing})",
    )


@dataclass(frozen=True)
class PulseShape:
    """Gaussian drive pulse: width sigma (ps), area (rad), carrier detuning (meV).

    The envelope is supported on [0, 2 n_cut sigma] (hard-clipped
    outside, centered at n_cut sigma) and renormalized so the truncated
    time integral of the Rabi frequency equals the requested area
    exactly.
    """

    sigma: float
    area: float
    detuning: float = 0.0
    n_cut: int = 4

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError("pulse sigma must be positive")
        if self.n_cut < 1:
            raise ValidationError("n_cut must be at least 1")

    @property
    def duration(self):
        return 2.0 * self.n_cut * self.sigma

    @property
    def center(self):
        return self.n_cut * self.sigma

    def rabi(self, t_rel):
        """Rabi frequency (rad/ps) at time t_rel after the support start."""
        t_rel = np.asarray(t_rel, dtype=float)
        renorm = erf(self.n_cut / np.sqrt(2.0))
        peak = self.area / (np.sqrt(2.0 * np.pi) * self.sigma * renorm)
        env = peak * np.exp(-0.5 * ((t_rel - self.center) / self.sigma) ** 2)
        inside = (t_rel >= 0.0) & (t_rel <= self.duration)
        return np.where(inside, env, 0.0)


def _unitary_exp(h, scale):
    """exp(scale * -i H / hbar) for Hermitian H via eigendecomposition."""
    w, q = np.linalg.eigh(h)
    return (q * np.exp(-1j * w * scale / HBAR)) @ q.conj().T


def _expm_batch(a):
    """exp of a stack of anti-Hermitian matrices (Taylor + squaring)."""
    dim = a.shape[-1]
    norm = np.max(np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))) if a.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.01)))) if norm > 0.01 else 0
    a = a / 2 ** squarings
    out = np.broadcast_to(np.eye(dim, dtype=complex), a.shape).copy()
    term = out.copy()
    for order in range(1, 13):
        term = term @ a / order
        out += term
        if np.max(np.abs(term)) < 1e-17:
            break
    for _ in range(squarings):
        out = out @ out
    return out


def _ordered_product(steps):
    """Time-ordered product steps[-1] @ ... @ steps[0] by pairwise reduction."""
    while steps.shape[0] > 1:
        if steps.shape[0] % 2:
            tail = steps[-1:]
            steps = np.concatenate([steps[1::2] @ steps[0:-1:2], tail])
        else:
            steps = steps[1::2] @ steps[0::2]
    return steps[0]


_PULSE_CHUNK = 2 ** 14


def _timeordered_unitary(model, pulse, substeps):
    """Midpoint-rule piecewise-constant-exponential pulse propagator.

    Texp over the pulse support with H0 + Hd frozen at each substep
    midpoint.  Substeps are built and exponentiated batched in chunks,
    so the adaptive refinement can afford large substep counts.
    """
    delta = pulse.duration / substeps
    sm = embed_composite(SIGMA_MINUS, np.eye(model.dim_env))
    u = np.eye(model.h0.shape[0], dtype=complex)
    for start in range(0, substeps, _PULSE_CHUNK):
        block = min(_PULSE_CHUNK, substeps - start)
        mids = (start + np.arange(block) + 0.5) * delta
        coeff = 0.5 * HBAR * pulse.rabi(mids) * np.exp(
            1j * pulse.detuning * (mids - pulse.center) / HBAR
        )
        h = coeff[:, None, None] * sm[None]
        h = h + np.conj(np.swapaxes(h, 1, 2)) + model.h0[None]
        steps = _expm_batch(-1j * (delta / HBAR) * h)
        u = _ordered_product(steps) @ u
    return u


def pulse_intervention(model, pulse, substeps=64, tol=1e-9, max_substeps=2 ** 21):
    """Finite-duration pulse as an instantaneous intervention.

    Builds P = exp(+i H0 dt / hbar) Texp(-i/hbar int (H0 + Hd(t)) dt)
    over the pulse support by adaptive midpoint substepping (doubling
    until the Frobenius change drops below ``tol``), so that applying P
    at the support start followed by free evolution reproduces the
    pulsed dynamics.  The recorded duration feeds the factorization
    bookkeeping.
    """
    if substeps < 1:
        raise ValidationError("substeps must be at least 1")
    n = substeps
    u_prev = _timeordered_unitary(model, pulse, n)
    change = np.inf
    while 2 * n <= max_substeps:
        n *= 2
        u_next = _timeordered_unitary(model, pulse, n)
        change = np.linalg.norm(u_next - u_prev)
        u_prev = u_next
        if change <= tol:
            break
    else:
        raise RefinementError(
            f"pulse propagator did not converge below {tol:.1e} by {max_substeps} substeps",
            achieved=change,
        )
    p = _unitary_exp(model.h0, -pulse.duration) @ u_prev  # exp(+i H0 dt / hbar) unwind
    return Intervention(
        kind="pulse",
        duration=pulse.duration,
        unitary=p,
        label=f"pulse(sigma={pulse.sigma},area={pulse.area / np.pi:.4g}pi)",
    )
