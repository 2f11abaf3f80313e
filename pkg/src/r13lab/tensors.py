"""Symmetric trace-free (stf) tensor algebra and 1-D slab gradient operators.

Second-order fields (stress-like) are handled through their five canonical
components in the fixed ordering

    (T11, T22, T12, T13, T23),   T33 = -T11 - T22,

which all serialization and assembly code shares.  Third-order tensors are
kept dense (27 entries); the 7-component reduction is an output view only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Canonical index pairs of the five independent stf components.
STF_PAIRS = ((0, 0), (1, 1), (0, 1), (0, 2), (1, 2))

# Independent entries of a symmetric trace-free 3rd-order tensor.  The
# remaining multisets follow from trace-freeness:
#   T133 = -T111 - T122,  T233 = -T112 - T222,  T333 = -T113 - T223.
STF3_TRIPLES = (
    (0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 1, 1), (0, 1, 2), (1, 1, 1), (1, 1, 2),
)


def stf_basis_matrices() -> np.ndarray:
    """Return the five canonical basis matrices E_a, shape (5, 3, 3).

    A component vector c represents the matrix sum_a c[a] * E_a.
    """
    basis = np.zeros((5, 3, 3))
    basis[0] = np.diag([1.0, 0.0, -1.0])
    basis[1] = np.diag([0.0, 1.0, -1.0])
    for a, (i, j) in enumerate(STF_PAIRS[2:], start=2):
        basis[a, i, j] = 1.0
        basis[a, j, i] = 1.0
    return basis


_BASIS = stf_basis_matrices()


@dataclass(frozen=True)
class StfTensor3:
    """Symmetric trace-free 3x3 tensor stored by canonical components."""

    components: np.ndarray  # shape (5,)

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.shape != (5,):
            raise ValueError(f"expected 5 components, got shape {c.shape}")
        object.__setattr__(self, "components", c)

    @classmethod
    def from_matrix(cls, a: np.ndarray) -> "StfTensor3":
        a = np.asarray(a, dtype=float)
        sym = 0.5 * (a + a.T)
        dev = sym - (np.trace(sym) / 3.0) * np.eye(3)
        return cls(np.array([dev[i, j] for (i, j) in STF_PAIRS]))

    def matrix(self) -> np.ndarray:
        return np.einsum("a,aij->ij", self.components, _BASIS)

    def norm2(self) -> float:
        """Frobenius double contraction T:T."""
        m = self.matrix()
        return float(np.sum(m * m))


@dataclass(frozen=True)
class Frame:
    """Orthonormal boundary frame (n outward, t1, t2 tangential)."""

    n: np.ndarray
    t1: np.ndarray
    t2: np.ndarray

    def __post_init__(self):
        for name in ("n", "t1", "t2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        vecs = (self.n, self.t1, self.t2)
        gram = np.array([[float(a @ b) for b in vecs] for a in vecs])
        if not np.allclose(gram, np.eye(3), atol=1e-14):
            raise ValueError("frame vectors are not orthonormal")


IDENTITY_FRAME = Frame(n=np.array([1.0, 0.0, 0.0]),
                       t1=np.array([0.0, 1.0, 0.0]),
                       t2=np.array([0.0, 0.0, 1.0]))


def stf2(a: np.ndarray) -> StfTensor3:
    """Project a 3x3 matrix onto its symmetric trace-free part."""
    return StfTensor3.from_matrix(a)


def sym3(b: np.ndarray) -> np.ndarray:
    """Full symmetrization of a 3rd-order tensor (average of 6 transposes)."""
    b = np.asarray(b, dtype=float)
    perms = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))
    return sum(np.transpose(b, p) for p in perms) / 6.0


def stf3(b: np.ndarray) -> np.ndarray:
    """Symmetric trace-free projection of a 3x3x3 tensor, returned dense.

    Subtracts (1/5)(t_i d_jk + t_j d_ik + t_k d_ij) from the symmetrization,
    where t is its single independent trace vector.
    """
    s = sym3(b)
    t = np.einsum("ill->i", s)
    eye = np.eye(3)
    corr = (np.einsum("i,jk->ijk", t, eye)
            + np.einsum("j,ik->ijk", t, eye)
            + np.einsum("k,ij->ijk", t, eye)) / 5.0
    return s - corr


def stf3_components(t: np.ndarray) -> np.ndarray:
    """The 7 independent entries of an stf 3rd-order tensor (view only)."""
    t = np.asarray(t, dtype=float)
    return np.array([t[i, j, k] for (i, j, k) in STF3_TRIPLES])


def slab_grad_vec(values: np.ndarray, derivs: np.ndarray):
    """Gradient of a vector field in slab geometry (variation along axis 1).

    With nabla = e1 d/dx the gradient matrix is derivs (x) e1; returns the
    full matrix and its stf2 projection.  values is unused algebraically but
    kept in the signature so call sites pass the whole field sample.
    """
    derivs = np.asarray(derivs, dtype=float)
    grad = np.zeros((3, 3))
    grad[:, 0] = derivs
    return grad, stf2(grad)


def slab_grad_stf2(field: StfTensor3, derivs: StfTensor3):
    """Gradient of an stf 2nd-order field in slab geometry.

    Returns ((nabla sigma)_ijk = dsigma_ij/dx * delta_k1 dense, its stf3
    projection, and the divergence (nabla . sigma)_i = dsigma_i1/dx).
    """
    dmat = derivs.matrix()
    grad = np.zeros((3, 3, 3))
    grad[:, :, 0] = dmat
    div = dmat[:, 0].copy()
    return grad, stf3(grad), div


def frame_components_vector(v: np.ndarray, frame: Frame) -> dict:
    v = np.asarray(v, dtype=float)
    return {
        "n": float(frame.n @ v),
        "t1": float(frame.t1 @ v),
        "t2": float(frame.t2 @ v),
    }


def frame_components_tensor(t: StfTensor3, frame: Frame) -> dict:
    m = t.matrix()
    axes = {"n": frame.n, "t1": frame.t1, "t2": frame.t2}
    out = {}
    for a_name, a in axes.items():
        for b_name, b in axes.items():
            out[a_name + b_name] = float(a @ m @ b)
    return out


def frame_components(obj, frame: Frame) -> dict:
    """Project a 3-vector or StfTensor3 onto a wall frame."""
    if isinstance(obj, StfTensor3):
        return frame_components_tensor(obj, frame)
    return frame_components_vector(np.asarray(obj), frame)
