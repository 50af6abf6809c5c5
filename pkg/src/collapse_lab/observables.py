"""Killing Hamiltonians (energy and spins), dispersions, brackets, critical sets.

Radial points use coordinates ``y = (R, θ, φ, ψ)`` with the fibre angle ``ψ``
generated by the energy.  In these coordinates

    g = dR²/F + (R²/4)(dθ² + sin²θ dφ²) + (R²F/4)(dψ + cos θ dφ)²
    ω = d((R²/4)(dψ + cos θ dφ))

Potential points use complex coordinates with real metric ``2 Re g_{ab̄}`` and
``g_{ab̄} = Σ'δ_{ab} + Σ'' z̄_a z_b``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BadParams, DimensionMismatch, SingularPoint, WrongChart
from .geometry import (
    Chart,
    ChartPoint,
    Family,
    ProfileMetric,
    chart_convert,
    dispersion_x,
    hamiltonian_x,
    profile_variable,
)
from .topology import EndKind, classify_manifold

HERMITIAN_TOL = 1e-12
FD_GRAD_STEP = 1e-6


class ObsKind(enum.Enum):
    ENERGY = "Energy"
    SPIN_AXIS = "SpinAxis"
    SPIN_MATRIX = "SpinMatrix"


@dataclass(frozen=True)
class Observable:
    kind: ObsKind
    axis: int | None = None
    h: np.ndarray | None = None

    def __post_init__(self):
        if self.kind is ObsKind.SPIN_AXIS and self.axis not in (1, 2, 3):
            raise BadParams(f"spin axis must be 1, 2 or 3, got {self.axis}")
        if self.kind is ObsKind.SPIN_MATRIX:
            object.__setattr__(self, "h", check_hermitian(self.h))

    @classmethod
    def energy(cls) -> "Observable":
        return cls(ObsKind.ENERGY)

    @classmethod
    def spin_axis(cls, i: int) -> "Observable":
        return cls(ObsKind.SPIN_AXIS, axis=i)

    @classmethod
    def spin_matrix(cls, h) -> "Observable":
        return cls(ObsKind.SPIN_MATRIX, h=h)

    @classmethod
    def parse(cls, spec) -> "Observable":
        """Accept ``"H"``, ``"S1"``..``"S3"`` or ``{"spin_matrix": [[...]]}``."""
        if isinstance(spec, Observable):
            return spec
        if isinstance(spec, dict) and "spin_matrix" in spec:
            return cls.spin_matrix(_complex_matrix(spec["spin_matrix"]))
        if spec == "H":
            return cls.energy()
        if isinstance(spec, str) and len(spec) == 2 and spec[0] == "S" and spec[1] in "123":
            return cls.spin_axis(int(spec[1]))
        raise BadParams(f"unknown observable {spec!r}")

    def name(self) -> str:
        if self.kind is ObsKind.ENERGY:
            return "H"
        if self.kind is ObsKind.SPIN_AXIS:
            return f"S{self.axis}"
        return "S[h]"


def _complex_matrix(rows) -> np.ndarray:
    def conv(v):
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(v[0], v[1])
        return complex(v)

    return np.array([[conv(v) for v in row] for row in rows], dtype=complex)


def check_hermitian(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"spin matrix must be square, got shape {h.shape}")
    if np.max(np.abs(h - h.conj().T)) > HERMITIAN_TOL:
        raise BadParams("spin matrix is not Hermitian")
    if abs(np.trace(h)) > HERMITIAN_TOL:
        raise BadParams("spin matrix is not trace-free")
    if not np.any(h):
        raise BadParams("spin matrix must be nonzero")
    return h


# ---------------------------------------------------------------- points

def _radial_coords(metric: ProfileMetric, p) -> np.ndarray:
    if metric.family is not Family.RADIAL_UN:
        raise WrongChart("spin axes are defined on the radial family")
    if not isinstance(p, ChartPoint) or p.chart not in (Chart.RADIAL_FRAME, Chart.CHI):
        raise WrongChart("spins need a RadialFrame (R, θ, φ, ψ) point")
    q = chart_convert(metric, p, Chart.RADIAL_FRAME)
    y = np.zeros(4)
    y[: len(q.coords)] = [float(c) for c in q.coords]
    return y


def _complex_coords(metric: ProfileMetric, p) -> np.ndarray:
    if metric.family is not Family.POTENTIAL_UN:
        raise WrongChart("spin matrices are defined on the potential family")
    if isinstance(p, ChartPoint):
        p = chart_convert(metric, p, Chart.COMPLEX).coords
    z = np.asarray(p, dtype=complex).ravel()
    if z.size != metric.complex_dimension:
        raise DimensionMismatch(f"expected {metric.complex_dimension} coordinates, got {z.size}")
    profile_variable(metric, float(np.vdot(z, z).real))
    return z


def _check_h(metric: ProfileMetric, h) -> np.ndarray:
    h = check_hermitian(h)
    if h.shape[0] != metric.complex_dimension:
        raise DimensionMismatch(f"h is {h.shape[0]}x{h.shape[0]}, metric has N = {metric.complex_dimension}")
    return h


# ---------------------------------------------------------------- Hamiltonians

def hamiltonian(metric: ProfileMetric, p) -> float:
    if metric.family is Family.POTENTIAL_UN and isinstance(p, ChartPoint) and p.chart is Chart.COMPLEX:
        z = np.asarray(p.coords, dtype=complex)
        return float(hamiltonian_x(metric, float(np.vdot(z, z).real)))
    return float(hamiltonian_x(metric, profile_variable(metric, p)))


def _spin_radial(y: np.ndarray, axis: int) -> float:
    R, th, ph = y[0], y[1], y[2]
    a2 = 0.25 * R * R
    if axis == 3:
        return -a2 * math.cos(th)
    return -a2 * math.sin(th) * (math.cos(ph) if axis == 1 else math.sin(ph))


def spin(metric: ProfileMetric, p, axis: int) -> float:
    """``S1 + i S2 = -a² sin θ e^{iφ}``, ``S3 = -a² cos θ`` with ``a = R/2``."""
    if axis not in (1, 2, 3):
        raise BadParams(f"spin axis must be 1, 2 or 3, got {axis}")
    return _spin_radial(_radial_coords(metric, p), axis)


def spin_general(metric: ProfileMetric, z, h) -> float:
    z = _complex_coords(metric, z)
    h = _check_h(metric, h)
    u = float(np.vdot(z, z).real)
    return -float(np.vdot(z, h @ z).real) * float(metric.profile(u, 1))


def observable_value(metric: ProfileMetric, p, obs: Observable) -> float:
    if obs.kind is ObsKind.ENERGY:
        return hamiltonian(metric, p)
    if obs.kind is ObsKind.SPIN_AXIS:
        return spin(metric, p, obs.axis)
    return spin_general(metric, p, obs.h)


# ---------------------------------------------------------------- dispersions

def dispersion(metric: ProfileMetric, p) -> float:
    """Squared gradient norm of the energy."""
    if metric.family is Family.POTENTIAL_UN and isinstance(p, ChartPoint) and p.chart is Chart.COMPLEX:
        z = np.asarray(p.coords, dtype=complex)
        return float(dispersion_x(metric, float(np.vdot(z, z).real)))
    return float(dispersion_x(metric, profile_variable(metric, p)))


def spin_dispersion(metric: ProfileMetric, p, axis: int) -> float:
    """``V3 = ¼R²(sin²θ + F cos²θ)``; ``V1``, ``V2`` are its rotations."""
    if axis not in (1, 2, 3):
        raise BadParams(f"spin axis must be 1, 2 or 3, got {axis}")
    R, th, ph, _ = _radial_coords(metric, p)
    F = float(metric.profile(R))
    c2, s2 = math.cos(th) ** 2, math.sin(th) ** 2
    if axis == 3:
        return 0.25 * R * R * (s2 + F * c2)
    inner = c2 + F * s2
    if axis == 1:
        return 0.25 * R * R * (math.sin(ph) ** 2 + math.cos(ph) ** 2 * inner)
    return 0.25 * R * R * (math.cos(ph) ** 2 + math.sin(ph) ** 2 * inner)


def potential_metric_matrix(metric: ProfileMetric, z: np.ndarray) -> np.ndarray:
    """``g_{ab̄}`` as a Hermitian matrix (row ``a``, column ``b``)."""
    u = float(np.vdot(z, z).real)
    s1, s2 = float(metric.profile(u, 1)), float(metric.profile(u, 2))
    return s1 * np.eye(z.size) + s2 * np.outer(z.conj(), z)


def spin_dispersion_general(metric: ProfileMetric, z, h, route: str = "closed") -> float:
    """Dispersion of ``S = -(z† h z) Σ'``.

    ``route="closed"`` uses ``2(Σ' z†h²z + Σ''(z†hz)²)``; ``route="metric"``
    contracts the Killing field ``h z`` with the explicit ``g_{ab̄}``.
    """
    z = _complex_coords(metric, z)
    h = _check_h(metric, h)
    if route == "metric":
        w = h @ z
        return float(2.0 * (w @ potential_metric_matrix(metric, z) @ w.conj()).real)
    if route != "closed":
        raise ValueError(f"unknown route {route!r}")
    u = float(np.vdot(z, z).real)
    s1, s2 = float(metric.profile(u, 1)), float(metric.profile(u, 2))
    hz = h @ z
    m = float(np.vdot(z, hz).real)
    return 2.0 * (s1 * float(np.vdot(hz, hz).real) + s2 * m * m)


# ---------------------------------------------------------------- gradients and brackets

def _radial_gradient(y: np.ndarray, obs: Observable) -> np.ndarray:
    R, th, ph = y[0], y[1], y[2]
    a2 = 0.25 * R * R
    if obs.kind is ObsKind.ENERGY:
        return np.array([-0.5 * R, 0.0, 0.0, 0.0])
    if obs.kind is not ObsKind.SPIN_AXIS:
        raise WrongChart("spin matrices are not defined on the radial family")
    ct, st, cp, sp = math.cos(th), math.sin(th), math.cos(ph), math.sin(ph)
    if obs.axis == 3:
        return np.array([-0.5 * R * ct, a2 * st, 0.0, 0.0])
    if obs.axis == 1:
        return np.array([-0.5 * R * st * cp, -a2 * ct * cp, a2 * st * sp, 0.0])
    return np.array([-0.5 * R * st * sp, -a2 * ct * sp, -a2 * st * cp, 0.0])


def radial_omega(y: np.ndarray) -> np.ndarray:
    """Kähler form in ``(R, θ, φ, ψ)`` coordinates."""
    R, th = y[0], y[1]
    W = np.zeros((4, 4))
    W[0, 3] = 0.5 * R
    W[0, 2] = 0.5 * R * math.cos(th)
    W[1, 2] = -0.25 * R * R * math.sin(th)
    return W - W.T


def radial_metric(metric: ProfileMetric, y: np.ndarray) -> np.ndarray:
    """Riemannian metric in ``(R, θ, φ, ψ)`` coordinates."""
    R, th = y[0], y[1]
    F = float(metric.profile(R))
    a2 = 0.25 * R * R
    ct, st = math.cos(th), math.sin(th)
    G = np.zeros((4, 4))
    G[0, 0] = 1.0 / F
    G[1, 1] = a2
    G[2, 2] = a2 * (st * st + F * ct * ct)
    G[3, 3] = a2 * F
    G[2, 3] = G[3, 2] = a2 * F * ct
    return G


def _fd_gradient(f: Callable[[np.ndarray], float], y: np.ndarray, h: float = FD_GRAD_STEP) -> np.ndarray:
    g = np.empty(y.size)
    for k in range(y.size):
        e = np.zeros(y.size)
        e[k] = h
        g[k] = (f(y + e) - f(y - e)) / (2.0 * h)
    return g


def _complex_gradient(metric: ProfileMetric, z: np.ndarray, obs: Observable, fd: bool) -> np.ndarray:
    """Holomorphic derivative ``∂_a A``."""
    h = np.eye(z.size) if obs.kind is ObsKind.ENERGY else obs.h
    if obs.kind is ObsKind.SPIN_AXIS:
        raise WrongChart("spin axes are defined on the radial family")
    if fd:
        def A(v):
            zz = v[: z.size] + 1j * v[z.size:]
            uu = float(np.vdot(zz, zz).real)
            return -float(np.vdot(zz, h @ zz).real) * float(metric.profile(uu, 1))
        g = _fd_gradient(A, np.concatenate([z.real, z.imag]))
        return 0.5 * (g[: z.size] - 1j * g[z.size:])
    u = float(np.vdot(z, z).real)
    s1, s2 = float(metric.profile(u, 1)), float(metric.profile(u, 2))
    m = float(np.vdot(z, h @ z).real)
    return -(s1 * (h @ z).conj() + m * s2 * z.conj())


def gradient_norm(metric: ProfileMetric, p, obs: Observable) -> float:
    """``|∇A|²`` from coordinate gradients and the inverse metric."""
    if metric.family is Family.RADIAL_UN:
        y = _radial_coords(metric, p)
        dA = _radial_gradient(y, obs)
        return float(dA @ np.linalg.solve(radial_metric(metric, y), dA))
    if metric.family is Family.POTENTIAL_UN:
        z = _complex_coords(metric, p)
        d = _complex_gradient(metric, z, obs, fd=False)
        return float(2.0 * (d @ np.linalg.solve(potential_metric_matrix(metric, z).T, d.conj())).real)
    if obs.kind is not ObsKind.ENERGY:
        raise WrongChart("one-dimensional metrics carry only the energy")
    return dispersion(metric, p)


def poisson_bracket(metric: ProfileMetric, p, A: Observable, B: Observable,
                    method: str = "analytic") -> float:
    """``{A, B} = ω^{-1}(dA, dB)``, normalised so that ``{S1, S2} = S3``.

    On the potential family this reads ``-2 Im(g^{ab̄} ∂_a A ∂̄_b B)``, giving
    ``{S_h, S_k} = S_{-i[h,k]}``.  ``method="fd"`` replaces the analytic
    gradients by central differences with step 1e-6.
    """
    A, B = Observable.parse(A), Observable.parse(B)
    if _same(A, B):
        return 0.0
    fd = method == "fd"
    if method not in ("analytic", "fd"):
        raise ValueError(f"unknown method {method!r}")
    fam = metric.family
    if fam is Family.ONE_DIM:
        raise WrongChart("one-dimensional metrics carry only the energy")
    if fam is Family.RADIAL_UN:
        y = _radial_coords(metric, p)
        if y[0] == 0.0 or math.sin(y[1]) == 0.0:
            raise SingularPoint("Euler angles degenerate at R = 0 or sin θ = 0")
        grads = []
        for obs in (A, B):
            if fd:
                grads.append(_fd_gradient(lambda v, o=obs: _value_radial(v, o), y))
            else:
                grads.append(_radial_gradient(y, obs))
        return -float(grads[0] @ np.linalg.solve(radial_omega(y), grads[1]))
    z = _complex_coords(metric, p)
    dA = _complex_gradient(metric, z, A, fd)
    dB = _complex_gradient(metric, z, B, fd)
    ginv_dB = np.linalg.solve(potential_metric_matrix(metric, z).T, dB.conj())
    return float(-2.0 * (dA @ ginv_dB).imag)


def _same(A: Observable, B: Observable) -> bool:
    if A.kind is not B.kind or A.axis != B.axis:
        return False
    return A.h is None or np.array_equal(A.h, B.h)


def _value_radial(y: np.ndarray, obs: Observable) -> float:
    if obs.kind is ObsKind.ENERGY:
        return -0.25 * y[0] ** 2
    return _spin_radial(y, obs.axis)


# ---------------------------------------------------------------- critical sets

@dataclass(frozen=True)
class CriticalLocus:
    where: str
    location: tuple
    value: float
    degenerate: bool
    description: str

    def to_json(self) -> dict:
        loc = [x if math.isfinite(x) else ("inf" if x > 0 else "-inf") for x in self.location]
        return {"where": self.where, "location": loc, "value": self.value,
                "degenerate": self.degenerate, "description": self.description}


def critical_set(metric: ProfileMetric, obs) -> list[CriticalLocus]:
    """Critical loci of an energy or spin observable on a complete manifold."""
    obs = Observable.parse(obs)
    cls = classify_manifold(metric).require_complete()
    out: list[CriticalLocus] = []
    N = metric.complex_dimension
    if metric.family is Family.ONE_DIM:
        if obs.kind is not ObsKind.ENERGY:
            raise WrongChart("one-dimensional metrics carry only the energy")
        for e in cls.ends:
            if e.kind is EndKind.NUT:
                val = float(hamiltonian_x(metric, e.location))
                out.append(CriticalLocus("pole", (e.location,), val, False, "zero of S"))
        return out
    if obs.kind is ObsKind.SPIN_MATRIX and metric.family is not Family.POTENTIAL_UN:
        raise WrongChart("spin matrices are defined on the potential family")
    if obs.kind is ObsKind.SPIN_AXIS and metric.family is not Family.RADIAL_UN:
        raise WrongChart("spin axes are defined on the radial family")
    if obs.kind is ObsKind.SPIN_MATRIX:
        _check_h(metric, obs.h)
    for e in cls.ends:
        if e.kind is EndKind.NUT:
            out.append(CriticalLocus("nut", (0.0,), 0.0, False, "fixed point of the whole group"))
        elif e.kind is EndKind.BOLT:
            R2 = e.radius ** 2
            # H0 = -R0²/4 (radial) or -R0²/2 (potential normalisation)
            H0 = -R2 / 4.0 if metric.family is Family.RADIAL_UN else -R2 / 2.0
            R0 = math.sqrt(R2)
            if obs.kind is ObsKind.ENERGY:
                out.append(CriticalLocus("bolt", (R0,), H0, True,
                                         f"every point of the bolt CP^{N - 1}"))
            elif obs.kind is ObsKind.SPIN_AXIS:
                poles = {3: ((0.0, 0.0), (math.pi, 0.0)),
                         1: ((math.pi / 2, 0.0), (math.pi / 2, math.pi)),
                         2: ((math.pi / 2, math.pi / 2), (math.pi / 2, 3 * math.pi / 2))}[obs.axis]
                for sgn, (th, ph) in zip((1.0, -1.0), poles):
                    out.append(CriticalLocus("bolt pole", (R0, th, ph), sgn * H0, False,
                                             "isolated point on the bolt"))
            else:
                lam, vecs = np.linalg.eigh(obs.h)
                for k, l in enumerate(lam):
                    mult = int(np.sum(np.abs(lam - l) < 1e-9))
                    out.append(CriticalLocus("bolt eigenline", (R0, k), float(l * H0), mult > 1,
                                             f"eigenvector {np.round(vecs[:, k], 12).tolist()}"))
    return out
