"""Velocity-space polynomial basis and Gaussian-weighted quadrature.

The basis functions are products of normalized associated Laguerre
polynomials in |xi|^2/2 with symmetric trace-free velocity monomials,
orthonormal (up to the documented tensor factors) under the Maxwellian
weight f_M(xi) = (2 pi)^{-3/2} exp(-|xi|^2/2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.special import eval_genlaguerre

from .state import StateVector
from .tensors import Frame, IDENTITY_FRAME, StfTensor3


class QuadratureExactnessWarning(UserWarning):
    """Raised when a declared integrand degree exceeds quadrature exactness."""


def normalized_laguerre(n: int, l: int, x):
    """Normalized associated Laguerre polynomial L-bar_n^(l+1/2)(x).

    Rodrigues form with prefactor sqrt(sqrt(pi) / (2^(l+1) n! Gamma(n+l+3/2))).
    The operator identity (d/dx - 1)^n x^(n+a) = n! x^a L_n^(a)(x) reduces it
    to the standard generalized Laguerre polynomial.
    """
    if n < 0 or l < 0:
        raise ValueError("n and l must be nonnegative")
    pref = math.sqrt(math.sqrt(math.pi)
                     / (2.0 ** (l + 1) * math.factorial(n) * math.gamma(n + l + 1.5)))
    return pref * math.factorial(n) * eval_genlaguerre(n, l + 0.5, x)


@dataclass(frozen=True)
class BasisIndex:
    """Index (n, l, components) of a basis function psi^n_{i1..il}."""

    n: int
    l: int
    components: tuple = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("radial index n must be nonnegative")
        if self.l not in (0, 1, 2):
            raise ValueError("tensor order l must be 0, 1, or 2")
        if len(self.components) != self.l:
            raise ValueError("components length must equal l")
        if any(c not in (1, 2, 3) for c in self.components):
            raise ValueError("component axes must be in {1,2,3}")


def _stf_monomial(l: int, components: tuple, xi: np.ndarray) -> np.ndarray:
    """xi_<i1...il> for l <= 2; xi has shape (..., 3)."""
    if l == 0:
        return np.ones(xi.shape[:-1])
    if l == 1:
        return xi[..., components[0] - 1]
    i, j = components[0] - 1, components[1] - 1
    mono = xi[..., i] * xi[..., j]
    if i == j:
        mono = mono - np.sum(xi * xi, axis=-1) / 3.0
    return mono


def psi_eval(idx: BasisIndex, xi) -> np.ndarray:
    """Evaluate psi^n_{i1..il}(xi) = L-bar_n^(l+1/2)(|xi|^2/2) xi_<i1..il>."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    radial = normalized_laguerre(idx.n, idx.l, 0.5 * np.sum(xi * xi, axis=-1))
    out = radial * _stf_monomial(idx.l, idx.components, xi)
    return out if out.size > 1 else float(out[0])


@dataclass(frozen=True)
class VelocityQuadrature:
    """Velocity-space quadrature with the Maxwellian weight absorbed.

    nodes: (N, 3) array; weights: (N,) positive, summing to 1 (up to the
    negligible tail truncation of split rules); exact_degree: per-axis
    polynomial degree integrated exactly against f_M.
    """

    nodes: np.ndarray
    weights: np.ndarray
    exact_degree: int

    @classmethod
    def gauss_hermite(cls, points_per_axis: int = 24) -> "VelocityQuadrature":
        """Tensor-product probabilists' Gauss-Hermite rule."""
        x, w = hermegauss(points_per_axis)
        w = w / math.sqrt(2.0 * math.pi)
        xs = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
        ws = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
        return cls(nodes=xs, weights=ws, exact_degree=2 * points_per_axis - 1)

    @classmethod
    def half_space(cls, axis: int = 0, points_normal: int = 64,
                   points_tangent: int = 24, cutoff: float = 14.0) -> "VelocityQuadrature":
        """Tensor rule whose `axis` direction is split at 0.

        The split keeps integrands with a kink at xi_axis = 0 (such as the
        half-range flux (xi_n)_+ f) accurate: each half is a mapped
        Gauss-Legendre rule on (0, cutoff) against the Gaussian weight.
        """
        t, wt = leggauss(points_normal)
        xp = 0.5 * cutoff * (t + 1.0)
        wp = 0.5 * cutoff * wt * np.exp(-0.5 * xp * xp) / math.sqrt(2.0 * math.pi)
        xn = np.concatenate([-xp[::-1], xp])
        wn = np.concatenate([wp[::-1], wp])

        xh, wh = hermegauss(points_tangent)
        wh = wh / math.sqrt(2.0 * math.pi)
        axes_x = [xh, xh, xh]
        axes_w = [wh, wh, wh]
        axes_x[axis] = xn
        axes_w[axis] = wn
        xs = np.stack(np.meshgrid(*axes_x, indexing="ij"), axis=-1).reshape(-1, 3)
        ws = (axes_w[0][:, None, None] * axes_w[1][None, :, None]
              * axes_w[2][None, None, :]).reshape(-1)
        return cls(nodes=xs, weights=ws, exact_degree=2 * points_tangent - 1)


def weighted_inner(f, g, quad: VelocityQuadrature, degree: int | None = None) -> float:
    """<f, g> = sum_q w_q f(xi_q) g(xi_q) against the Maxwellian weight.

    `degree` is an optional total-degree hint for the product f*g; if it
    exceeds the declared exactness a QuadratureExactnessWarning is emitted.
    """
    if degree is not None and degree > quad.exact_degree:
        warnings.warn(
            f"integrand degree {degree} exceeds quadrature exactness "
            f"{quad.exact_degree}", QuadratureExactnessWarning, stacklevel=2)
    fv = f(quad.nodes) if callable(f) else np.asarray(f)
    gv = g(quad.nodes) if callable(g) else np.asarray(g)
    return float(np.sum(quad.weights * fv * gv))


@dataclass(frozen=True)
class PhiClosure:
    """Closure coefficients of the auxiliary basis combinations phi.

    phi_i^1   = sum_{n>=1} c1[n-1] psi_i^n     (heat-flux carrier)
    phi_ij^0  = sum_{n>=0} c2[n]   psi_ij^n    (stress carrier)

    subject to sum c1^2 = 15/2 and sum c2^2 = 15.
    """

    c1: np.ndarray = field(default_factory=lambda: np.array([-math.sqrt(7.5)]))
    c2: np.ndarray = field(default_factory=lambda: np.array([math.sqrt(15.0)]))

    def __post_init__(self):
        object.__setattr__(self, "c1", np.atleast_1d(np.asarray(self.c1, dtype=float)))
        object.__setattr__(self, "c2", np.atleast_1d(np.asarray(self.c2, dtype=float)))

    def validate(self, tol: float = 1e-6) -> None:
        r1 = abs(float(np.sum(self.c1 ** 2)) - 7.5)
        r2 = abs(float(np.sum(self.c2 ** 2)) - 15.0)
        if r1 > tol or r2 > tol:
            raise ValueError(
                f"closure normalization residuals ({r1:.3e}, {r2:.3e}) exceed {tol:g}")

    def phi1(self, i: int, xi: np.ndarray) -> np.ndarray:
        """phi_i^1 evaluated at xi (i is a 1-based axis)."""
        out = 0.0
        for n, c in enumerate(self.c1, start=1):
            out = out + c * psi_eval(BasisIndex(n, 1, (i,)), xi)
        return out

    def phi2(self, i: int, j: int, xi: np.ndarray) -> np.ndarray:
        """phi_ij^0 evaluated at xi (1-based axes)."""
        out = 0.0
        for n, c in enumerate(self.c2):
            out = out + c * psi_eval(BasisIndex(n, 2, (i, j)), xi)
        return out


DEFAULT_CLOSURE = PhiClosure()


@dataclass(frozen=True)
class TruncatedDistribution:
    """The truncated distribution f-tilde determined by a macroscopic state."""

    state: StateVector
    closure: PhiClosure = DEFAULT_CLOSURE

    def __call__(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        u_st = self.state
        out = u_st.rho * np.ones(xi.shape[0])
        out = out - math.sqrt(1.5) * u_st.theta * psi_eval(BasisIndex(1, 0), xi)
        for i in range(3):
            out = out + math.sqrt(3.0) * u_st.u[i] * psi_eval(BasisIndex(0, 1, (i + 1,)), xi)
            out = out + 0.4 * u_st.s_bar[i] * self.closure.phi1(i + 1, xi)
        sig = u_st.sigma_bar.matrix()
        for i in range(3):
            for j in range(3):
                if sig[i, j] != 0.0:
                    out = out + 0.5 * sig[i, j] * self.closure.phi2(i + 1, j + 1, xi)
        return out


def tilde_f_from_state(u: StateVector, closure: PhiClosure = DEFAULT_CLOSURE) -> TruncatedDistribution:
    return TruncatedDistribution(state=u, closure=closure)


def moment_extract(f, quad: VelocityQuadrature,
                   closure: PhiClosure = DEFAULT_CLOSURE) -> StateVector:
    """Recover the macroscopic state from a velocity distribution."""
    fv = f(quad.nodes) if callable(f) else np.asarray(f, dtype=float)

    def inner(g):
        return float(np.sum(quad.weights * g * fv))

    rho = inner(np.ones(quad.nodes.shape[0]))
    theta = -math.sqrt(2.0 / 3.0) * inner(psi_eval(BasisIndex(1, 0), quad.nodes))
    u = np.array([math.sqrt(3.0) * inner(psi_eval(BasisIndex(0, 1, (i + 1,)), quad.nodes))
                  for i in range(3)])
    s_bar = np.array([inner(closure.phi1(i + 1, quad.nodes)) for i in range(3)])
    sig = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            sig[i, j] = sig[j, i] = inner(closure.phi2(i + 1, j + 1, quad.nodes))
    return StateVector(rho=rho, theta=theta, u=u, s_bar=s_bar,
                       sigma_bar=StfTensor3.from_matrix(sig))


def kinetic_energy(u: StateVector, quad: VelocityQuadrature,
                   closure: PhiClosure = DEFAULT_CLOSURE) -> float:
    """<f-tilde, f-tilde>; equals the mass-weighted state norm squared."""
    fv = tilde_f_from_state(u, closure)(quad.nodes)
    return float(np.sum(quad.weights * fv * fv))


def wall_density(u_at_wall: StateVector, theta_w: float, quad: VelocityQuadrature,
                 frame: Frame = IDENTITY_FRAME,
                 closure: PhiClosure = DEFAULT_CLOSURE) -> float:
    """rho_W = sqrt(2 pi) <(xi.n)_+, f-tilde> - theta_W / 2.

    The quadrature must resolve the half-space kink along frame.n (use
    VelocityQuadrature.half_space on the matching axis).
    """
    fv = tilde_f_from_state(u_at_wall, closure)(quad.nodes)
    xin = quad.nodes @ np.asarray(frame.n, dtype=float)
    flux = float(np.sum(quad.weights * np.maximum(xin, 0.0) * fv))
    return math.sqrt(2.0 * math.pi) * flux - 0.5 * theta_w
