"""Korn-type inequality probes on the unit cube.

Certifies, by finite elements and dense generalized eigensolves, that

    ||u||_0^2 + ||stf grad u||_0^2  >~  ||u||_1^2      (classical form)
    ||u||_b^2 + ||stf grad u||_0^2  >~  ||u||_1^2      (boundary form)

hold with a strictly positive constant on hexahedral meshes, and that the
kernel of the stf-gradient form is exactly the 10-dimensional conformal
Killing space once the element space contains quadratics.

Elements are tensor-product Lagrange hexahedra (degree 1 or 2) on uniform
subdivisions of [0,1]^3, so every element matrix is a translate of a single
reference matrix and quadrature is exact for all assembled forms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

# Dense eigensolves only; beyond this the module is out of its depth.
MAX_DENSE_DOFS = 6000

# Near-zero eigenvalues below this multiple of the largest one count as kernel.
KERNEL_REL_THRESHOLD = 1e-10


# ---------------------------------------------------------------------------
# Conformal Killing fields


@dataclass(frozen=True)
class CKField:
    """Conformal Killing field u(x) = a + lam*x + A x + 2(b.x)x - |x|^2 b.

    A must be skew-symmetric; the four blocks give dimension 3+1+3+3 = 10.
    """

    a: np.ndarray
    lam: float
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        A = np.asarray(self.A, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (3,) or b.shape != (3,):
            raise ValueError("a and b must be 3-vectors")
        if A.shape != (3, 3):
            raise ValueError("A must be a 3x3 matrix")
        if not np.allclose(A, -A.T, atol=1e-12):
            raise ValueError("A must be skew-symmetric")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def coefficient_vector(self) -> np.ndarray:
        """The 10 free coefficients (a, lam, upper-triangular A, b)."""
        return np.concatenate([
            self.a,
            [self.lam],
            [self.A[0, 1], self.A[0, 2], self.A[1, 2]],
            self.b,
        ])


def ck_field_from_coefficients(coeffs: np.ndarray) -> CKField:
    """Inverse of CKField.coefficient_vector."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (10,):
        raise ValueError("coefficient vector must have length 10")
    A = np.array([
        [0.0, c[4], c[5]],
        [-c[4], 0.0, c[6]],
        [-c[5], -c[6], 0.0],
    ])
    return CKField(a=c[:3], lam=c[3], A=A, b=c[7:])


def random_ck_field(rng: np.random.Generator, normalized: bool = True) -> CKField:
    coeffs = rng.standard_normal(10)
    if normalized:
        coeffs = coeffs / np.linalg.norm(coeffs)
    return ck_field_from_coefficients(coeffs)


def ck_eval(f: CKField, x: np.ndarray) -> np.ndarray:
    """Evaluate the field at points x of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    bx = x @ f.b
    return (f.a + f.lam * x + x @ f.A.T
            + 2.0 * bx[..., None] * x - np.sum(x * x, axis=-1)[..., None] * f.b)


def ck_jacobian(f: CKField, x: np.ndarray) -> np.ndarray:
    """Analytic Jacobian J_ij = d u_i / d x_j at points x of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    eye = np.eye(3)
    bx = x @ f.b
    J = (f.lam + 2.0 * bx)[..., None, None] * eye + f.A
    J = J + 2.0 * x[..., :, None] * f.b[None, :]
    J = J - 2.0 * f.b[..., :, None] * x[..., None, :]
    return J


def stf_of_matrix(J: np.ndarray) -> np.ndarray:
    """Symmetric trace-free part of 3x3 matrices, shape (..., 3, 3)."""
    sym = 0.5 * (J + np.swapaxes(J, -1, -2))
    tr = np.trace(J, axis1=-2, axis2=-1)
    return sym - (tr / 3.0)[..., None, None] * np.eye(3)


# ---------------------------------------------------------------------------
# Mesh and elements


def _lagrange_1d(p: int, x: np.ndarray):
    """Equispaced Lagrange basis on [0,1]: values and derivatives.

    Returns (vals, ders) of shape (p+1, len(x)).
    """
    nodes = np.linspace(0.0, 1.0, p + 1)
    x = np.asarray(x, dtype=float)
    vals = np.ones((p + 1, x.size))
    ders = np.zeros((p + 1, x.size))
    for i in range(p + 1):
        for j in range(p + 1):
            if j == i:
                continue
            vals[i] *= (x - nodes[j]) / (nodes[i] - nodes[j])
        for k in range(p + 1):
            if k == i:
                continue
            term = np.ones(x.size) / (nodes[i] - nodes[k])
            for j in range(p + 1):
                if j in (i, k):
                    continue
                term *= (x - nodes[j]) / (nodes[i] - nodes[j])
            ders[i] += term
    return vals, ders


def _gauss_01(q: int):
    """Gauss-Legendre rule mapped to [0,1]."""
    t, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (t + 1.0), 0.5 * w


@dataclass(frozen=True)
class CubeMesh:
    """Uniform hexahedral partition of the unit cube with Lagrange nodes.

    Nodes form an (n*degree + 1)^3 grid indexed x-fastest; each element's
    local nodes follow the same tensor ordering.
    """

    n: int
    degree: int
    nodes: np.ndarray = field(repr=False)
    elements: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    @property
    def h(self) -> float:
        return 1.0 / self.n


def build_cube_mesh(n: int, degree: int) -> CubeMesh:
    if n < 1:
        raise ValueError("n must be at least 1")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    p = degree
    m = n * p + 1
    axis = np.linspace(0.0, 1.0, m)
    Z, Y, X = np.meshgrid(axis, axis, axis, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    nloc = (p + 1) ** 3
    elements = np.empty((n ** 3, nloc), dtype=np.int64)
    local = np.arange(p + 1)
    lz, ly, lx = np.meshgrid(local, local, local, indexing="ij")
    for ez in range(n):
        for ey in range(n):
            for ex in range(n):
                gx = ex * p + lx
                gy = ey * p + ly
                gz = ez * p + lz
                e = ex + n * (ey + n * ez)
                elements[e] = (gx + m * (gy + m * gz)).ravel()
    return CubeMesh(n=n, degree=degree, nodes=nodes, elements=elements)


def _reference_tensors(p: int):
    """Shape values and gradients at Gauss points of the reference cube.

    Returns (weights (nq,), vals (nq, nloc), grads (nq, nloc, 3)) on [0,1]^3.
    """
    q = p + 1
    x1, w1 = _gauss_01(q)
    v1, d1 = _lagrange_1d(p, x1)  # (p+1, q)

    nloc = (p + 1) ** 3
    nq = q ** 3
    vals = np.empty((nq, nloc))
    grads = np.empty((nq, nloc, 3))
    weights = np.empty(nq)
    for qz in range(q):
        for qy in range(q):
            for qx in range(q):
                iq = qx + q * (qy + q * qz)
                weights[iq] = w1[qx] * w1[qy] * w1[qz]
                for az in range(p + 1):
                    for ay in range(p + 1):
                        for ax in range(p + 1):
                            l = ax + (p + 1) * (ay + (p + 1) * az)
                            vals[iq, l] = v1[ax, qx] * v1[ay, qy] * v1[az, qz]
                            grads[iq, l, 0] = d1[ax, qx] * v1[ay, qy] * v1[az, qz]
                            grads[iq, l, 1] = v1[ax, qx] * d1[ay, qy] * v1[az, qz]
                            grads[iq, l, 2] = v1[ax, qx] * v1[ay, qy] * d1[az, qz]
    return weights, vals, grads


def _stf_b_matrix(grads: np.ndarray) -> np.ndarray:
    """B[l, c, i, j] with stf(grad u)_ij = sum_{l,c} u_{l,c} B[l,c,i,j].

    grads holds physical shape-function gradients of shape (nloc, 3).
    """
    nloc = grads.shape[0]
    eye = np.eye(3)
    B = np.zeros((nloc, 3, 3, 3))
    B += 0.5 * np.einsum("ci,lj->lcij", eye, grads)
    B += 0.5 * np.einsum("cj,li->lcij", eye, grads)
    B -= np.einsum("lc,ij->lcij", grads, eye) / 3.0
    return B


@dataclass(frozen=True)
class CubeForms:
    """Gram matrices of the four quadratic forms over vector nodal dofs."""

    mesh: CubeMesh
    l2: scipy.sparse.csr_matrix = field(repr=False)
    h1: scipy.sparse.csr_matrix = field(repr=False)
    stf: scipy.sparse.csr_matrix = field(repr=False)
    boundary: scipy.sparse.csr_matrix = field(repr=False)


def _scatter(mesh: CubeMesh, element_matrix: np.ndarray,
             element_list=None) -> scipy.sparse.csr_matrix:
    """Accumulate one shared element matrix over (a subset of) elements.

    element_matrix has shape (nloc, nloc) acting on scalar nodes, or
    (3*nloc, 3*nloc) acting on interleaved vector dofs.
    """
    elements = mesh.elements if element_list is None else element_list
    nloc = elements.shape[1]
    if element_matrix.shape == (nloc, nloc):
        element_matrix = np.kron(element_matrix, np.eye(3))
    dofs = (3 * elements[:, :, None] + np.arange(3)).reshape(len(elements), -1)
    rows = np.repeat(dofs, dofs.shape[1], axis=1).ravel()
    cols = np.tile(dofs, (1, dofs.shape[1])).ravel()
    data = np.tile(element_matrix.ravel(), len(elements))
    mat = scipy.sparse.coo_matrix((data, (rows, cols)),
                                  shape=(mesh.n_dofs, mesh.n_dofs))
    return mat.tocsr()


def _boundary_face_matrix(mesh: CubeMesh) -> scipy.sparse.csr_matrix:
    """Gram of the boundary L2 form, assembled face by face.

    Each cube face is a uniform n x n quad mesh of degree p; the 2-D face
    mass matrix is shared by all faces up to node renumbering.
    """
    p = mesh.degree
    n = mesh.n
    m = n * p + 1
    q = p + 1
    x1, w1 = _gauss_01(q)
    v1, _ = _lagrange_1d(p, x1)

    nloc2 = (p + 1) ** 2
    face_mass = np.zeros((nloc2, nloc2))
    for qb in range(q):
        for qa in range(q):
            w = w1[qa] * w1[qb]
            phi = np.empty(nloc2)
            for bb in range(p + 1):
                for aa in range(p + 1):
                    phi[aa + (p + 1) * bb] = v1[aa, qa] * v1[bb, qb]
            face_mass += w * np.outer(phi, phi)
    face_mass *= mesh.h ** 2

    # Grid indices of the 2-D trace meshes on the six faces.  For a face
    # with normal along axis k, the in-face axes are the other two in
    # increasing order; orientation does not matter for a mass matrix.
    def face_elements(axis: int, side: int) -> np.ndarray:
        fixed = 0 if side == 0 else m - 1
        faces = []
        local = np.arange(p + 1)
        lb, la = np.meshgrid(local, local, indexing="ij")
        axes = [ax for ax in range(3) if ax != axis]
        for eb in range(n):
            for ea in range(n):
                ga = ea * p + la
                gb = eb * p + lb
                idx = [None, None, None]
                idx[axis] = np.full_like(ga, fixed)
                idx[axes[0]] = ga
                idx[axes[1]] = gb
                faces.append((idx[0] + m * (idx[1] + m * idx[2])).ravel())
        return np.array(faces, dtype=np.int64)

    total = scipy.sparse.csr_matrix((mesh.n_dofs, mesh.n_dofs))
    for axis in range(3):
        for side in (0, 1):
            total = total + _scatter(mesh, face_mass, face_elements(axis, side))
    return total


def assemble_cube_forms(mesh: CubeMesh) -> CubeForms:
    """Assemble L2, H1, stf-gradient, and boundary Gram matrices."""
    p = mesh.degree
    h = mesh.h
    weights, vals, grads_ref = _reference_tensors(p)
    grads = grads_ref / h  # physical gradients on an h-cube element
    scale = h ** 3

    nloc = vals.shape[1]
    mass = np.zeros((nloc, nloc))
    stiff = np.zeros((nloc, nloc))
    stf_el = np.zeros((3 * nloc, 3 * nloc))
    for iq in range(len(weights)):
        w = weights[iq] * scale
        mass += w * np.outer(vals[iq], vals[iq])
        stiff += w * (grads[iq] @ grads[iq].T)
        B = _stf_b_matrix(grads[iq]).reshape(3 * nloc, 9)
        stf_el += w * (B @ B.T)

    l2 = _scatter(mesh, mass)
    grad = _scatter(mesh, stiff)
    stf = _scatter(mesh, stf_el)
    boundary = _boundary_face_matrix(mesh)
    return CubeForms(mesh=mesh, l2=l2, h1=(l2 + grad).tocsr(), stf=stf,
                     boundary=boundary)


def interpolate(mesh: CubeMesh, func) -> np.ndarray:
    """Nodal interpolation of a vector field; returns interleaved dofs."""
    values = np.asarray(func(mesh.nodes), dtype=float)
    if values.shape != (mesh.n_nodes, 3):
        raise ValueError("field must return one 3-vector per node")
    return values.ravel()


def stf_energy(mesh: CubeMesh, u: np.ndarray) -> float:
    """Quadrature of ||stf grad u_h||^2 as a sum of squares.

    Mathematically equal to u' S u with the assembled Gram matrix, but for
    vectors in the kernel the pointwise evaluation is quadratically small
    in rounding error where the matrix form only reaches it linearly.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_dofs,):
        raise ValueError("dof vector has wrong length")
    p = mesh.degree
    weights, _, grads_ref = _reference_tensors(p)
    grads = grads_ref / mesh.h
    scale = mesh.h ** 3
    total = 0.0
    coeffs = u.reshape(mesh.n_nodes, 3)
    for e in range(mesh.elements.shape[0]):
        ue = coeffs[mesh.elements[e]]  # (nloc, 3)
        # grad u_h (i,j) at quadrature points: sum_l ue[l,i] grads[q,l,j]
        J = np.einsum("li,qlj->qij", ue, grads)
        S = stf_of_matrix(J)
        total += scale * float(np.einsum("q,qij,qij->", weights, S, S))
    return total


# ---------------------------------------------------------------------------
# Eigenvalue probes


@dataclass(frozen=True)
class KornReport:
    """Generalized eigenvalue summary for the Korn-type forms."""

    n: int
    degree: int
    n_dofs: int
    lambda_min_classical: float
    lambda_min_boundary: float
    stf_kernel_dim: int
    kernel_threshold: float
    stf_eig_max: float
    classical_tail: np.ndarray = field(repr=False)
    boundary_tail: np.ndarray = field(repr=False)
    stf_tail: np.ndarray = field(repr=False)


def _dense_eigvals(A: scipy.sparse.spmatrix, B: scipy.sparse.spmatrix) -> np.ndarray:
    return scipy.linalg.eigh(A.toarray(), B.toarray(), eigvals_only=True)


def korn_constants(forms: CubeForms, n_tail: int = 12) -> KornReport:
    """Solve the three generalized eigenproblems and summarize.

    Pencils: (L2 + stf) vs H1, (boundary + stf) vs H1, and stf vs L2 for
    the kernel count.  Dense solves only; raises for oversized meshes.
    """
    mesh = forms.mesh
    if mesh.n_dofs > MAX_DENSE_DOFS:
        raise ValueError(
            f"mesh has {mesh.n_dofs} dofs; dense eigensolves support "
            f"at most {MAX_DENSE_DOFS}")
    classical = _dense_eigvals(forms.l2 + forms.stf, forms.h1)
    boundary = _dense_eigvals(forms.boundary + forms.stf, forms.h1)
    stf = _dense_eigvals(forms.stf, forms.l2)
    threshold = KERNEL_REL_THRESHOLD * stf[-1]
    kernel_dim = int(np.count_nonzero(stf < threshold))
    return KornReport(
        n=mesh.n,
        degree=mesh.degree,
        n_dofs=mesh.n_dofs,
        lambda_min_classical=float(classical[0]),
        lambda_min_boundary=float(boundary[0]),
        stf_kernel_dim=kernel_dim,
        kernel_threshold=float(threshold),
        stf_eig_max=float(stf[-1]),
        classical_tail=classical[:n_tail].copy(),
        boundary_tail=boundary[:n_tail].copy(),
        stf_tail=stf[:n_tail].copy(),
    )


def boundary_korn_eigenvalue(mesh: CubeMesh) -> float:
    """Smallest eigenvalue of (boundary + stf) vs H1 only, via subset solve."""
    forms = assemble_cube_forms(mesh)
    if mesh.n_dofs > MAX_DENSE_DOFS:
        raise ValueError(
            f"mesh has {mesh.n_dofs} dofs; dense eigensolves support "
            f"at most {MAX_DENSE_DOFS}")
    vals = scipy.linalg.eigh((forms.boundary + forms.stf).toarray(),
                             forms.h1.toarray(), eigvals_only=True,
                             subset_by_index=[0, 0])
    return float(vals[0])


# ---------------------------------------------------------------------------
# Boundary nonvanishing of conformal Killing fields


@dataclass(frozen=True)
class CKVanishingReport:
    """Boundary L2 norm of a conformal Killing field over the cube faces."""

    boundary_norm: float
    coefficient_norm: float

    @property
    def ratio(self) -> float:
        if self.coefficient_norm == 0.0:
            return 0.0
        return self.boundary_norm / self.coefficient_norm


def ck_boundary_gram(mesh: CubeMesh, n_quad: int = 4) -> np.ndarray:
    """10x10 Gram of the conformal Killing basis in the boundary L2 product.

    A strictly positive smallest eigenvalue certifies that no nonzero
    conformal Killing field vanishes on the cube boundary, and its square
    root lower-bounds the boundary norm of any unit-coefficient field.
    """
    basis = [ck_field_from_coefficients(row) for row in np.eye(10)]
    gram = np.empty((10, 10))
    # Polarization: <u, v>_b = (||u + v||_b^2 - ||u||_b^2 - ||v||_b^2) / 2,
    # but direct quadrature of products is cheaper and exact here.
    x1, w1 = _gauss_01(n_quad)
    h = mesh.h
    values = []
    weights = []
    for axis in range(3):
        axes = [ax for ax in range(3) if ax != axis]
        for side in (0.0, 1.0):
            for ea in range(mesh.n):
                for eb in range(mesh.n):
                    pa = (ea + x1) * h
                    pb = (eb + x1) * h
                    A, Bv = np.meshgrid(pa, pb, indexing="ij")
                    pts = np.empty((n_quad, n_quad, 3))
                    pts[..., axis] = side
                    pts[..., axes[0]] = A
                    pts[..., axes[1]] = Bv
                    values.append(np.stack([ck_eval(f, pts) for f in basis]))
                    weights.append(np.outer(w1, w1) * h * h)
    vals = np.concatenate([v.reshape(10, -1, 3) for v in values], axis=1)
    w = np.concatenate([wt.ravel() for wt in weights])
    gram = np.einsum("aqc,bqc,q->ab", vals, vals, w)
    return gram


def ck_vanishing_check(f: CKField, mesh: CubeMesh, n_quad: int = 4) -> CKVanishingReport:
    """Exact boundary L2 norm of the analytic field over the cube faces.

    The integrand |u|^2 is quartic per axis, so n_quad >= 3 Gauss points
    per face axis integrate it exactly; face panels follow the mesh.
    """
    x1, w1 = _gauss_01(n_quad)
    total = 0.0
    h = mesh.h
    for axis in range(3):
        axes = [ax for ax in range(3) if ax != axis]
        for side in (0.0, 1.0):
            for ea in range(mesh.n):
                for eb in range(mesh.n):
                    pa = (ea + x1) * h
                    pb = (eb + x1) * h
                    A, Bv = np.meshgrid(pa, pb, indexing="ij")
                    pts = np.empty((n_quad, n_quad, 3))
                    pts[..., axis] = side
                    pts[..., axes[0]] = A
                    pts[..., axes[1]] = Bv
                    vals = ck_eval(f, pts)
                    w2d = np.outer(w1, w1) * h * h
                    total += float(np.sum(w2d * np.sum(vals * vals, axis=-1)))
    return CKVanishingReport(
        boundary_norm=float(np.sqrt(total)),
        coefficient_norm=float(np.linalg.norm(f.coefficient_vector())),
    )
