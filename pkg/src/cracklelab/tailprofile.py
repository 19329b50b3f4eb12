"""Radial density families and the scaling-law formula layer.

A profile describes a rotation-invariant density on R^d.  Two families are
supported:

* ``weibull``: q(x) = C * exp(-(|x|/tau)^v), the light-tail family.  The decay
  exponent, its clamped inverse, and the auxiliary function 1/exponent' all
  have closed forms, which the scaling rules and radius sequences build on.
* ``powerlaw``: q(x) = C / (1 + |x|^alpha), the heavy-tail contrast density.
  It exposes only the density, spacing, and tail-mass machinery; the decay
  exponent apparatus is deliberately undefined for it.

All functions here are pure; profiles and policies are frozen dataclasses and
safe to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import DomainError, QuadratureError

WEIBULL = "weibull"
POWERLAW = "powerlaw"

# scaling policy kinds
CONSTANT = "constant"
NAIVE = "naive"
LIGHT_TAIL = "light_tail"
SUPEREXP = "superexp"
KNN = "knn"

_POLICY_KINDS = (CONSTANT, NAIVE, LIGHT_TAIL, SUPEREXP, KNN)

# minimum admissible inner-log argument; smaller values fail loudly instead of
# silently producing NaN
LOG_GUARD = 1e-9

_MIN_INTENSITY = math.e**math.e


def sphere_area(d: int) -> float:
    """Surface area of the unit (d-1)-sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _quad(func, lo, hi, epsrel) -> float:
    val, abserr, info = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=epsrel,
                                       limit=200, full_output=True)[:3]
    # quad appends a message only on failure; a 4-tuple means non-convergence
    if not np.isfinite(val):
        raise QuadratureError(f"radial quadrature diverged on [{lo}, {hi}]")
    if abserr > max(abs(val), 1e-300) * epsrel * 10.0 and abserr > 1e-250:
        raise QuadratureError(
            f"radial quadrature did not reach rtol={epsrel} on [{lo}, {hi}]"
        )
    return val


@dataclass(frozen=True)
class TailProfile:
    """A radial density on R^d, either Weibull-type light tail or power-law."""

    kind: str
    d: int
    v: float | None = None
    tau: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in (WEIBULL, POWERLAW):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if not isinstance(self.d, int) or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        if self.kind == WEIBULL:
            if self.v is None or self.tau is None or self.v <= 0 or self.tau <= 0:
                raise DomainError("weibull profile needs v > 0 and tau > 0")
            if self.alpha is not None:
                raise DomainError("weibull profile takes no alpha")
        else:
            if self.alpha is None or self.alpha <= self.d:
                raise DomainError(
                    f"powerlaw profile needs alpha > d for normalizability "
                    f"(got alpha={self.alpha!r}, d={self.d})"
                )
            if self.v is not None or self.tau is not None:
                raise DomainError("powerlaw profile takes no v/tau")

    # -- constructors ------------------------------------------------------

    @classmethod
    def weibull(cls, v: float, tau: float = 1.0, d: int = 2) -> "TailProfile":
        return cls(kind=WEIBULL, d=d, v=float(v), tau=float(tau))

    @classmethod
    def power_law(cls, alpha: float, d: int = 2) -> "TailProfile":
        return cls(kind=POWERLAW, d=d, alpha=float(alpha))

    # -- basic shape -------------------------------------------------------

    @property
    def regime(self) -> str:
        """Decay regime: sub/exp/superexponential for Weibull, heavy otherwise."""
        if self.kind == POWERLAW:
            return "heavy"
        if self.v < 1.0:
            return "subexponential"
        if self.v == 1.0:
            return "exponential"
        return "superexponential"

    def _require_weibull(self, what: str):
        if self.kind != WEIBULL:
            raise DomainError(
                f"{what} is undefined for {self.kind} profiles "
                "(no decay-exponent machinery)"
            )

    def decay(self, z):
        """Decay exponent (z/tau)^v of the Weibull density, z >= 0."""
        self._require_weibull("decay exponent")
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise DomainError("decay exponent needs z >= 0")
        out = (z / self.tau) ** self.v
        return float(out) if out.ndim == 0 else out

    def decay_inv(self, y):
        """Inverse of the decay exponent, clamped to be >= 1 on all of R."""
        self._require_weibull("inverse decay exponent")
        y = np.asarray(y, dtype=float)
        out = np.where(y > 0, self.tau * np.maximum(y, 0.0) ** (1.0 / self.v), 1.0)
        out = np.maximum(out, 1.0)
        return float(out) if out.ndim == 0 else out

    def auxiliary(self, z):
        """Reciprocal of the decay exponent's derivative: (tau^v / v) * z^(1-v)."""
        self._require_weibull("auxiliary function")
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise DomainError("auxiliary function needs z > 0")
        out = (self.tau**self.v / self.v) * z ** (1.0 - self.v)
        return float(out) if out.ndim == 0 else out

    # -- density machinery (both families) ---------------------------------

    def radial_shape(self, t):
        """Unnormalized radial density value at |x| = t."""
        t = np.asarray(t, dtype=float)
        if self.kind == WEIBULL:
            out = np.exp(-((t / self.tau) ** self.v))
        else:
            out = 1.0 / (1.0 + t**self.alpha)
        return float(out) if out.ndim == 0 else out

    @cached_property
    def norm_constant(self) -> float:
        """Normalizing constant C with integral of C * shape over R^d equal to 1."""
        s = sphere_area(self.d)
        radial = _quad(lambda t: t ** (self.d - 1) * self.radial_shape(t),
                       0.0, np.inf, epsrel=1e-10)
        return 1.0 / (s * radial)

    def density(self, x) -> float:
        """Density q(x); accepts a point of R^d or a scalar radius."""
        x = np.asarray(x, dtype=float)
        t = np.linalg.norm(x) if x.ndim else float(x)
        return self.norm_constant * float(self.radial_shape(t))

    def local_spacing(self, x) -> float:
        """Characteristic inter-point spacing q(x)^(-1/d) at x."""
        return self.density(x) ** (-1.0 / self.d)

    def _spacing_at_radius(self, t):
        """Vectorized local spacing as a function of the radius |x| = t."""
        t = np.asarray(t, dtype=float)
        q = self.norm_constant * self.radial_shape(t)
        return q ** (-1.0 / self.d)

    def tail_mass(self, R: float) -> float:
        """Probability mass outside the ball of radius R, by radial quadrature."""
        if R < 0:
            raise DomainError("tail_mass needs R >= 0")
        if R == 0.0:
            return 1.0
        s = sphere_area(self.d)
        val = _quad(lambda t: t ** (self.d - 1) * self.radial_shape(t),
                    R, np.inf, epsrel=1e-9)
        return min(1.0, s * self.norm_constant * val)

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == WEIBULL:
            out["v"] = self.v
            out["tau"] = self.tau
        else:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TailProfile":
        # norm_constant is recomputed, never trusted from the file
        allowed = {"kind", "d", "v", "tau", "alpha", "norm_constant"}
        unknown = set(obj) - allowed
        if unknown:
            raise DomainError(f"unknown profile keys: {sorted(unknown)}")
        kw = {k: obj[k] for k in ("kind", "d", "v", "tau", "alpha") if k in obj}
        kw["d"] = int(kw.get("d", 0))
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TailProfile":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class ScalingPolicy:
    """A rule mapping a point to a ball radius.

    kinds:
      constant   -> bandwidth
      naive      -> bandwidth * local_spacing(x)
      light_tail -> bandwidth * decay_inv(log(e + local_spacing(x)))
      superexp   -> bandwidth * log(e + log(1 + local_spacing(x)))
      knn        -> distance to the k-th nearest neighbour (needs the cloud)

    ``multiplier`` is an extra caller-applied factor (the contractibility
    statements use doubled radii); ``doubled()`` bumps it so that doubling is
    well defined for every kind, including knn.
    """

    kind: str
    bandwidth: float = 1.0
    k: int | None = None
    multiplier: float = 1.0

    def __post_init__(self):
        if self.kind not in _POLICY_KINDS:
            raise DomainError(f"unknown scaling kind {self.kind!r}")
        if self.bandwidth <= 0:
            raise DomainError("bandwidth must be positive")
        if self.multiplier <= 0:
            raise DomainError("multiplier must be positive")
        if self.kind == KNN:
            if self.k is None or self.k < 1:
                raise DomainError("knn policy needs k >= 1")
        elif self.k is not None:
            raise DomainError(f"{self.kind} policy takes no k")

    def doubled(self) -> "ScalingPolicy":
        return replace(self, multiplier=2.0 * self.multiplier)

    def with_bandwidth(self, bandwidth: float) -> "ScalingPolicy":
        return replace(self, bandwidth=float(bandwidth))

    def scale_factor(self, profile: TailProfile, x) -> float:
        """Bandwidth-free scale factor at x (the sigma-hat of the rule)."""
        if self.kind == CONSTANT:
            return 1.0
        if self.kind == KNN:
            raise DomainError("knn policy has no pointwise scale factor; "
                              "radii come from the sampled cloud")
        spacing = profile.local_spacing(x)
        if self.kind == NAIVE:
            return spacing
        if self.kind == LIGHT_TAIL:
            profile._require_weibull("light_tail scaling")
            return profile.decay_inv(math.log(math.e + spacing))
        # superexp
        return math.log(math.e + math.log1p(spacing))

    def radius(self, profile: TailProfile, x) -> float:
        """Ball radius at x: multiplier * bandwidth * scale_factor."""
        return self.multiplier * self.bandwidth * self.scale_factor(profile, x)

    def _scale_factor_at_radius(self, profile: TailProfile, t):
        """Vectorized scale factor as a function of the radius |x| = t."""
        if self.kind == CONSTANT:
            return np.ones_like(np.asarray(t, dtype=float))
        if self.kind == KNN:
            raise DomainError("knn policy has no pointwise scale factor")
        spacing = profile._spacing_at_radius(t)
        if self.kind == NAIVE:
            return spacing
        if self.kind == LIGHT_TAIL:
            profile._require_weibull("light_tail scaling")
            return profile.decay_inv(np.log(math.e + spacing))
        return np.log(math.e + np.log1p(spacing))

    def to_json_dict(self) -> dict:
        out = {"kind": self.kind, "bandwidth": self.bandwidth}
        if self.k is not None:
            out["k"] = self.k
        if self.multiplier != 1.0:
            out["multiplier"] = self.multiplier
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ScalingPolicy":
        allowed = {"kind", "bandwidth", "k", "multiplier"}
        unknown = set(obj) - allowed
        if unknown:
            raise DomainError(f"unknown policy keys: {sorted(unknown)}")
        return cls(**obj)


@dataclass(frozen=True)
class RadiusSequences:
    """Core/crackle radii and their log levels for one intensity n."""

    n: float
    bandwidth: float
    delta: float
    core_level: float       # log n + d log r_n - log log(r_n^-1 * decay_inv(log n)) - delta
    crackle_level: float    # log n + (d-1) log decay_inv(log n) + log auxiliary(...) + log log n
    core_radius: float      # decay_inv(core_level)
    crackle_radius: float   # decay_inv(crackle_level)


def _guarded_log(x: float, what: str) -> float:
    if x < LOG_GUARD:
        raise DomainError(f"inner log argument for {what} is {x:.3e} < {LOG_GUARD}; "
                          "increase n or adjust the bandwidth")
    return math.log(x)


def default_delta(profile: TailProfile) -> float:
    """Default covering-lemma offset: max(0, log(d / C)) + 1."""
    profile._require_weibull("radius sequences")
    return max(0.0, math.log(profile.d / profile.norm_constant)) + 1.0


def radius_sequences(profile: TailProfile, n: float, bandwidth: float,
                     delta: float | None = None) -> RadiusSequences:
    """Core and crackle radii for intensity n and bandwidth r_n."""
    profile._require_weibull("radius sequences")
    if n < _MIN_INTENSITY:
        raise DomainError(f"need n >= e^e ~ {_MIN_INTENSITY:.3f} so that "
                          f"log log n is defined, got n={n}")
    if bandwidth <= 0:
        raise DomainError("bandwidth must be positive")
    if delta is None:
        delta = default_delta(profile)
    log_n = math.log(n)
    log_log_n = _guarded_log(log_n, "log log n")
    inv_at_logn = profile.decay_inv(log_n)
    inner = _guarded_log(inv_at_logn / bandwidth, "log(r_n^-1 * decay_inv(log n))")
    core_level = (log_n + profile.d * math.log(bandwidth)
                  - _guarded_log(inner, "log log(r_n^-1 * decay_inv(log n))")
                  - delta)
    crackle_level = (log_n + (profile.d - 1) * math.log(inv_at_logn)
                     + math.log(profile.auxiliary(inv_at_logn)) + log_log_n)
    return RadiusSequences(
        n=float(n), bandwidth=float(bandwidth), delta=float(delta),
        core_level=core_level, crackle_level=crackle_level,
        core_radius=profile.decay_inv(core_level),
        crackle_radius=profile.decay_inv(crackle_level),
    )


def default_bandwidth(profile: TailProfile, n: float, regime: str | None = None) -> float:
    """Bandwidth sequence satisfying the regime's smallness condition with margin.

    For v <= 1 the condition is auxiliary(decay_inv(log n)) * log log n /
    (r_n * decay_inv(log n)) -> 0; for v > 1 it weakens to
    auxiliary(decay_inv(log n)) / r_n -> 0.  The returned sequences leave a
    (log log n)^(1/2) margin in either case, so the condition ratio is
    exactly (log log n)^(-1/2).
    """
    profile._require_weibull("default bandwidth")
    if n < _MIN_INTENSITY:
        raise DomainError(f"need n >= e^e ~ {_MIN_INTENSITY:.3f}, got n={n}")
    if regime is None:
        regime = LIGHT_TAIL if profile.v <= 1.0 else SUPEREXP
    if regime not in (LIGHT_TAIL, SUPEREXP):
        raise DomainError(f"regime must be {LIGHT_TAIL!r} or {SUPEREXP!r}")
    log_n = math.log(n)
    log_log_n = _guarded_log(log_n, "log log n")
    aux = profile.auxiliary(profile.decay_inv(log_n))
    if regime == LIGHT_TAIL:
        return aux * log_log_n**1.5 / profile.decay_inv(log_n)
    return aux * log_log_n**0.5


def bandwidth_condition_ratio(profile: TailProfile, n: float, bandwidth: float,
                              regime: str | None = None) -> float:
    """The regime's o(1) condition ratio evaluated at (n, r_n)."""
    profile._require_weibull("bandwidth condition")
    if regime is None:
        regime = LIGHT_TAIL if profile.v <= 1.0 else SUPEREXP
    log_n = math.log(n)
    _guarded_log(log_n, "log log n")
    aux = profile.auxiliary(profile.decay_inv(log_n))
    if regime == LIGHT_TAIL:
        return aux * math.log(log_n) / (bandwidth * profile.decay_inv(log_n))
    return aux / bandwidth


@dataclass(frozen=True)
class ValidityDiagnostics:
    """Finite-n readouts of the noise-killing and non-triviality conditions."""

    noise_killing_ratio: float
    nontriviality_ratio: float
    sequences: RadiusSequences


def validity_diagnostics(profile: TailProfile, policy: ScalingPolicy, n: float,
                         bandwidth: float | None = None,
                         delta: float | None = None) -> ValidityDiagnostics:
    """Evaluate (crackle - core) / (r_n * sigma) and r_n * sigma / core.

    sigma is the policy's scale factor at a probe point at distance
    core_radius from the origin.  Small first ratio means the scaling kills
    noise; small second ratio means it stays non-trivial.
    """
    if bandwidth is None:
        bandwidth = default_bandwidth(profile, n)
    seqs = radius_sequences(profile, n, bandwidth, delta)
    probe = np.zeros(profile.d)
    probe[0] = seqs.core_radius
    scale = bandwidth * policy.scale_factor(profile, probe)
    return ValidityDiagnostics(
        noise_killing_ratio=(seqs.crackle_radius - seqs.core_radius) / scale,
        nontriviality_ratio=scale / seqs.core_radius,
        sequences=seqs,
    )
