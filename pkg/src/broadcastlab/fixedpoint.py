"""Fixed-point analysis of Heisenberg channel actions: nullspace extraction,
the Cesaro projector onto the fixed-point space, the broadcasting product,
its comparison with the quotient (Choi-Effros) product, and the atomic
decomposition into an eigenvalue-1 POVM with dual states."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import MeasurePrepareChannel, apply, channel_matrix, symmetric_lift
from .config import DimensionCapError, dimension_cap
from .operators import (
    DiscretePOVM,
    OperatorError,
    as_complex_matrix,
    dagger,
    frob_norm,
    hs_inner,
    unvec,
    vec,
)

__all__ = [
    "FixedPointError",
    "FixedPointSpace",
    "CesaroResult",
    "BroadcastingAlgebra",
    "AtomicDecomposition",
    "fixed_space",
    "cesaro_apply",
    "psi0_matrix",
    "broadcasting_product",
    "choi_effros_compare",
    "atomic_decomposition",
    "fixedpoint_report",
]


class FixedPointError(RuntimeError):
    """Fixed-point analysis could not be completed reliably."""


@dataclass(frozen=True)
class FixedPointSpace:
    """Hilbert-Schmidt-orthonormal Hermitian basis of Fix of a Heisenberg action."""

    channel: object
    basis: tuple
    tol: float
    singular_values: tuple  # ascending ladder of sigma(L - id)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def project_coefficients(self, a) -> np.ndarray:
        """Real expansion coefficients of a Hermitian operator over the basis."""
        a = as_complex_matrix(a)
        return np.array([np.real(hs_inner(b, a)) for b in self.basis])

    def contains(self, a, tol: float | None = None) -> bool:
        a = as_complex_matrix(a)
        coeffs = [hs_inner(b, a) for b in self.basis]
        proj = sum(c * b for c, b in zip(coeffs, self.basis))
        resid = frob_norm(a - proj)
        return resid <= (tol if tol is not None else 1e-8) * max(1.0, frob_norm(a))


def _nullspace(m: np.ndarray, rel_tol: float):
    """Orthonormal nullspace columns and the ascending singular-value ladder."""
    svals = np.linalg.svd(m, compute_uv=False)
    smax = svals.max(initial=0.0)
    if smax == 0.0:
        return np.eye(m.shape[1], dtype=complex), np.sort(svals)
    _, s, vh = np.linalg.svd(m)
    thr = rel_tol * smax
    keep = s <= thr
    # svd pads s only for square m here; guard against wide/tall anyway
    if len(s) < m.shape[1]:
        keep = np.concatenate([keep, np.ones(m.shape[1] - len(s), dtype=bool)])
        s = np.concatenate([s, np.zeros(m.shape[1] - len(s))])
    cols = vh.conj().T[:, keep]
    s_asc = np.sort(s)
    k = cols.shape[1]
    if 0 < k < m.shape[1] and s_asc[k] < 10.0 * thr:
        raise FixedPointError(
            "singular-value threshold separates no spectral gap; ladder: "
            + np.array2string(s_asc, precision=3)
        )
    return cols, s_asc


def _hermitian_fixed_basis(cols: np.ndarray, d: int) -> list[np.ndarray]:
    """Hermitian HS-orthonormal basis spanning the (adjoint-closed) column span."""
    m = cols.shape[1]
    candidates = []
    for c in cols.T:
        b = unvec(c, d)
        candidates.append(0.5 * (b + dagger(b)))
        candidates.append((b - dagger(b)) / 2j)
    out: list[np.ndarray] = []
    for x in candidates:
        y = x.copy()
        for _ in range(2):  # reorthogonalize once to keep the basis tight
            for b in out:
                y = y - np.real(hs_inner(b, y)) * b
        nrm = frob_norm(y)
        if nrm > 1e-7:
            out.append(y / nrm)
        if len(out) == m:
            break
    if len(out) != m:
        raise FixedPointError(
            f"failed to extract a Hermitian basis: got {len(out)} of {m} elements"
        )
    return out


def fixed_space(channel, tol: float = 1e-9, cap: int | None = None) -> FixedPointSpace:
    """Fixed-point space of the Heisenberg action via a vectorized nullspace.

    The basis spans the numerical nullspace of (Lambda* - id) at relative
    singular-value threshold `tol`, orthonormal in the Hilbert-Schmidt inner
    product and closed under the adjoint.
    """
    cap = cap if cap is not None else dimension_cap()
    d = channel.d_out  # Heisenberg operand side
    if channel.d_in != channel.d_out:
        raise OperatorError("fixed points need a square channel (d_in == d_out)")
    if d > cap:
        raise DimensionCapError(f"dimension {d} exceeds cap {cap}")
    lmat = channel_matrix(channel, picture="heisenberg")
    cols, ladder = _nullspace(lmat - np.eye(d * d), tol)
    basis = _hermitian_fixed_basis(cols, d) if cols.shape[1] else []
    for b in basis:
        resid = frob_norm(apply(channel, b, "heisenberg") - b)
        if resid > 100 * max(tol, 1e-12) * max(1.0, float(ladder[-1]) if len(ladder) else 1.0):
            raise FixedPointError(f"basis element fails the fixed-point check: {resid:.3e}")
    return FixedPointSpace(channel=channel, basis=tuple(basis), tol=tol,
                           singular_values=tuple(float(s) for s in ladder))


@dataclass(frozen=True)
class CesaroResult:
    matrix: np.ndarray
    n_terms: int
    residual: float
    converged: bool


def cesaro_apply(channel, a, n_terms: int = 1000, early_stop_tol: float = 1e-12,
                 picture: str = "heisenberg") -> CesaroResult:
    """Truncated Cesaro average (1/n) sum_{k<n} Lambda^k(a).

    Stops at the first n where successive averages differ by at most
    `early_stop_tol` in Frobenius norm; non-convergence within `n_terms`
    is reported through the residual, not raised.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    x = as_complex_matrix(a)
    total = x.copy()
    avg = total.copy()
    residual = np.inf
    for n in range(2, n_terms + 1):
        x = apply(channel, x, picture)
        total += x
        new_avg = total / n
        residual = frob_norm(new_avg - avg)
        avg = new_avg
        if residual <= early_stop_tol:
            return CesaroResult(avg, n, residual, True)
    if n_terms == 1:
        residual = np.inf
    return CesaroResult(avg, n_terms, float(residual), residual <= early_stop_tol)


def psi0_matrix(channel, method: str = "spectral", tol: float = 1e-9,
                n_terms: int = 4096) -> np.ndarray:
    """Matrix of the fixed-point projector psi_0 on vectorized operators.

    "spectral" builds the eigenvalue-1 eigenprojector of the vectorized
    Heisenberg action (the Cesaro limit; the peripheral spectrum is
    semisimple for channel duals). "cesaro" returns the truncated average,
    which converges like 1/n and serves as an independent witness.
    """
    lmat = channel_matrix(channel, picture="heisenberg")
    n = lmat.shape[0]
    if method == "cesaro":
        term = np.eye(n, dtype=complex)
        total = term.copy()
        avg = total.copy()
        for k in range(2, n_terms + 1):
            term = lmat @ term
            total += term
            new_avg = total / k
            if frob_norm(new_avg - avg) <= 1e-14:
                return new_avg
            avg = new_avg
        return avg
    if method != "spectral":
        raise ValueError(f"unknown psi_0 method {method!r}")
    right, _ = _nullspace(lmat - np.eye(n), tol)
    left, _ = _nullspace((lmat - np.eye(n)).conj().T, tol)
    if right.shape[1] != left.shape[1]:
        raise FixedPointError(
            f"left/right fixed spaces disagree: {left.shape[1]} vs {right.shape[1]}"
        )
    if right.shape[1] == 0:
        return np.zeros((n, n), dtype=complex)
    gram = left.conj().T @ right
    proj = right @ np.linalg.solve(gram, left.conj().T)
    if frob_norm(proj @ proj - proj) > 1e-8 * max(1.0, frob_norm(proj)):
        raise FixedPointError("spectral fixed-point projector is not idempotent")
    return proj


class BroadcastingAlgebra:
    """Fixed points of an entanglement-breaking channel with the broadcasting
    product A * B = psi_0(Phi*(A (x) B)).

    Built from the measure-prepare channel, its symmetric lift, the spectral
    psi_0 (cross-checked against a truncated Cesaro average), and the product
    table over the Hermitian fixed basis.
    """

    def __init__(self, channel: MeasurePrepareChannel, tol: float = 1e-9,
                 validate_tol: float = 1e-8, cesaro_terms: int = 4096):
        if not isinstance(channel, MeasurePrepareChannel):
            raise OperatorError("broadcasting algebra needs a measure-prepare channel")
        if channel.d_in != channel.d_out:
            raise OperatorError("broadcasting algebra needs a square channel")
        self.channel = channel
        self.d = channel.d_in
        self.tol = tol
        self.space = fixed_space(channel, tol=tol)
        self.lift = symmetric_lift(channel)
        self.projector = psi0_matrix(channel, method="spectral", tol=tol)

        lmat = channel_matrix(channel, picture="heisenberg")
        self.intertwining_residual = float(
            frob_norm(self.projector @ lmat - self.projector)
        )
        self.idempotency_residual = float(
            frob_norm(self.projector @ self.projector - self.projector)
        )
        cesaro = psi0_matrix(channel, method="cesaro", n_terms=cesaro_terms)
        self.cesaro_cross_residual = float(frob_norm(cesaro - self.projector))

        m = self.space.dim
        basis = self.space.basis
        table = np.zeros((m, m, m))
        imag_drift = 0.0
        for i in range(m):
            for j in range(i, m):
                prod = self._raw_product(basis[i], basis[j])
                for k in range(m):
                    c = hs_inner(basis[k], prod)
                    imag_drift = max(imag_drift, abs(c.imag))
                    table[i, j, k] = c.real
                    table[j, i, k] = c.real
        self.product_table = table
        self.table_imag_drift = imag_drift
        self.unit_coefficients = self.space.project_coefficients(np.eye(self.d))

        self.commutativity_residual = self._commutativity_residual()
        self.associativity_residual = self._associativity_residual()
        self.psi0_cp_residual = self._psi0_cp_residual()
        worst = max(self.idempotency_residual, self.commutativity_residual,
                    self.associativity_residual, self.psi0_cp_residual)
        if worst > validate_tol:
            raise FixedPointError(
                f"broadcasting algebra validation failed: worst residual {worst:.3e}"
            )

    def _raw_product(self, a, b) -> np.ndarray:
        """psi_0(Phi*(a (x) b)) without membership checks."""
        phi = np.zeros((self.d, self.d), dtype=complex)
        for g, s in zip(self.channel.povm.effects, self.channel.states):
            phi += np.trace(s @ a) * np.trace(s @ b) * g
        return self.project(phi)

    def project(self, a) -> np.ndarray:
        """Apply psi_0."""
        return unvec(self.projector @ vec(as_complex_matrix(a)), self.d)

    def _commutativity_residual(self) -> float:
        t = self.product_table
        return float(np.max(np.abs(t - t.transpose(1, 0, 2))) if t.size else 0.0)

    def _associativity_residual(self) -> float:
        t = self.product_table
        if not t.size:
            return 0.0
        # (B_i * B_j) * B_k vs B_i * (B_j * B_k), contracted through the table
        left = np.einsum("ijm,mkl->ijkl", t, t)
        right = np.einsum("jkm,iml->ijkl", t, t)
        return float(np.max(np.abs(left - right)))

    def _psi0_cp_residual(self) -> float:
        d = self.d
        choi = np.zeros((d * d, d * d), dtype=complex)
        for k in range(d):
            for l in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[k, l] = 1.0
                choi[k * d:(k + 1) * d, l * d:(l + 1) * d] = self.project(e)
        w = np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))
        return float(max(0.0, -w.min()))

    def coefficients_product(self, a_coeffs, b_coeffs) -> np.ndarray:
        """Broadcasting product in basis coefficients."""
        return np.einsum("i,j,ijk->k", a_coeffs, b_coeffs, self.product_table)

    def multiplication_matrix(self, coeffs) -> np.ndarray:
        """Matrix of x -> a * x on basis coefficients."""
        return np.einsum("i,ijk->kj", coeffs, self.product_table)

    def from_coefficients(self, coeffs) -> np.ndarray:
        return sum(c * b for c, b in zip(coeffs, self.space.basis))

    def product(self, a, b, membership_tol: float = 1e-8) -> np.ndarray:
        """A * B = psi_0(Phi*(A (x) B)) for fixed-point operands."""
        for name, x in (("left", a), ("right", b)):
            x = as_complex_matrix(x)
            resid = frob_norm(self.project(x) - x)
            if resid > membership_tol * max(1.0, frob_norm(x)):
                raise OperatorError(
                    f"{name} operand lies outside the fixed-point space "
                    f"(projection residual {resid:.3e})"
                )
        return self._raw_product(self.project(a), self.project(b))


def broadcasting_product(algebra: BroadcastingAlgebra, a, b) -> np.ndarray:
    return algebra.product(a, b)


def choi_effros_compare(algebra: BroadcastingAlgebra, a, b) -> float:
    """max deviation || psi_0(Phi*(A (x) B)) - psi_0(AB) ||_F."""
    a = as_complex_matrix(a)
    b = as_complex_matrix(b)
    return float(frob_norm(algebra.product(a, b) - algebra.project(a @ b)))


@dataclass(frozen=True)
class AtomicDecomposition:
    """Eigenvalue-1 POVM {G_i} with dual states {sigma_i}, tr(sigma_i G_j) = delta_ij."""

    povm: DiscretePOVM
    states: tuple
    algebra: BroadcastingAlgebra = field(repr=False)
    state_repair_residual: float
    redraws: int

    @property
    def atoms(self):
        return self.povm.effects

    def rebuilt_channel(self) -> MeasurePrepareChannel:
        """Measure-prepare channel psi_n(A) = sum_i tr(sigma_i A) G_i."""
        return MeasurePrepareChannel(self.povm, self.states)

    def reconstruct(self, a) -> np.ndarray:
        """sum_i tr(sigma_i A) G_i."""
        a = as_complex_matrix(a)
        return sum(np.trace(s @ a) * g for g, s in zip(self.povm.effects, self.states))


def atomic_decomposition(algebra: BroadcastingAlgebra, tol: float = 1e-8,
                         seed: int = 0, max_redraws: int = 8) -> AtomicDecomposition:
    """Minimal projections of the broadcasting algebra and their dual states.

    A generic self-adjoint fixed element (seeded random real combination of
    the basis, redrawn on a degenerate spectrum) is diagonalized inside the
    algebra; its spectral idempotents are the atoms.  Dual states are the
    densities of the characters composed with psi_0, repaired to the density
    cone with the repair distance recorded.
    """
    m = algebra.space.dim
    basis = algebra.space.basis
    rng = np.random.default_rng(seed)

    atoms_coeffs = None
    redraws = 0
    for attempt in range(max_redraws):
        coeffs = rng.standard_normal(m)
        mult = algebra.multiplication_matrix(coeffs)
        evals, evecs = np.linalg.eig(mult)
        if np.max(np.abs(evals.imag)) > 1e-7 * max(1.0, np.max(np.abs(evals))):
            redraws += 1
            continue
        evals = evals.real
        spread = max(1.0, float(evals.max() - evals.min()) if m > 1 else 1.0)
        if m > 1:
            gaps = np.abs(evals[:, None] - evals[None, :])
            np.fill_diagonal(gaps, np.inf)
            if gaps.min() < 1e-6 * spread:
                redraws += 1
                continue
        candidates = []
        ok = True
        for v in evecs.T:
            v = v.real if np.max(np.abs(v.imag)) < 1e-9 else v
            sq = algebra.coefficients_product(v, v)
            scale = np.vdot(v, sq) / np.vdot(v, v)
            if abs(scale) < 1e-10:
                ok = False
                break
            g = np.asarray(v / scale, dtype=float if np.isrealobj(v) else complex)
            # one idempotent-polish step: g <- 3 g*g - 2 g*(g*g)
            gg = algebra.coefficients_product(g, g)
            ggg = algebra.coefficients_product(g, gg)
            g = 3.0 * gg - 2.0 * ggg
            candidates.append(np.real(g))
        if ok:
            atoms_coeffs = candidates
            break
        redraws += 1
    if atoms_coeffs is None:
        raise FixedPointError(
            f"atomic decomposition: degeneracy unresolved after {max_redraws} redraws"
        )

    # deterministic ordering: descending trace, then lexicographic coefficients
    def _key(g):
        mat = algebra.from_coefficients(g)
        return (-round(float(np.real(np.trace(mat))), 9),
                tuple(np.round(g, 9)))

    atoms_coeffs.sort(key=_key)
    atoms = [algebra.from_coefficients(g) for g in atoms_coeffs]

    resid_sum = frob_norm(sum(atoms) - np.eye(algebra.d))
    if resid_sum > 10 * tol:
        raise FixedPointError(f"atoms do not sum to the identity: residual {resid_sum:.3e}")
    for i, gi in enumerate(atoms_coeffs):
        for j, gj in enumerate(atoms_coeffs):
            prod = algebra.coefficients_product(gi, gj)
            target = gi if i == j else np.zeros(m)
            if np.max(np.abs(prod - target)) > 10 * tol:
                raise FixedPointError(
                    f"atoms {i},{j} are not orthogonal idempotents in the product"
                )

    # characters: B_k = sum_i char_i(B_k) G_i  =>  char matrix = inv([g_1 .. g_m])
    gmat = np.stack(atoms_coeffs, axis=1)
    char = np.linalg.inv(gmat)  # char[i, k] = char_i(B_k)

    states = []
    repair = 0.0
    for i in range(m):
        q = algebra.from_coefficients(char[i])
        sigma = dagger(unvec(algebra.projector.conj().T @ vec(q), algebra.d))
        sigma = 0.5 * (sigma + dagger(sigma))
        w, v = np.linalg.eigh(sigma)
        w_clipped = np.clip(w, 0.0, None)
        total = w_clipped.sum()
        if total <= 0:
            raise FixedPointError(f"dual state {i} collapsed under cone repair")
        w_clipped /= total
        repaired = v @ np.diag(w_clipped) @ dagger(v)
        repair = max(repair, frob_norm(repaired - sigma))
        states.append(repaired)

    decomposition = AtomicDecomposition(
        povm=DiscretePOVM(tuple(atoms), tol=max(tol, 1e-8)),
        states=tuple(states),
        algebra=algebra,
        state_repair_residual=float(repair),
        redraws=redraws,
    )

    pairing = np.array([[np.real(np.trace(s @ g)) for g in atoms] for s in states])
    if np.max(np.abs(pairing - np.eye(m))) > 10 * tol:
        raise FixedPointError("dual states do not pair with the atoms as delta_ij")
    for b in basis:
        if frob_norm(decomposition.reconstruct(b) - b) > 10 * tol:
            raise FixedPointError("atomic reconstruction fails on a basis element")
    return decomposition


def fixedpoint_report(channel, tol: float = 1e-9, seed: int = 0,
                      include_algebra: bool = True) -> dict:
    """JSON-ready fixed-point report: basis dimension, singular-value ladder,
    product-table residuals, and atoms with the tolerances that produced them."""
    space = fixed_space(channel, tol=tol)
    report = {
        "dimension": channel.d_in,
        "tolerance": tol,
        "seed": seed,
        "basis_dimension": space.dim,
        "singular_value_ladder": list(space.singular_values),
        "singular_part": "identically zero at finite dimension; not probed here",
    }
    if include_algebra and isinstance(channel, MeasurePrepareChannel):
        algebra = BroadcastingAlgebra(channel, tol=tol)
        decomp = atomic_decomposition(algebra, seed=seed)
        from .serialization import operator_to_json  # local import to avoid a cycle

        report["product_table_residuals"] = {
            "commutativity": algebra.commutativity_residual,
            "associativity": algebra.associativity_residual,
            "psi0_idempotency": algebra.idempotency_residual,
            "psi0_intertwining": algebra.intertwining_residual,
            "psi0_complete_positivity": algebra.psi0_cp_residual,
            "cesaro_cross_check": algebra.cesaro_cross_residual,
            "table_imag_drift": algebra.table_imag_drift,
        }
        report["atoms"] = [
            {
                "effect": operator_to_json(g),
                "dual_state": operator_to_json(s),
                "trace": float(np.real(np.trace(g))),
            }
            for g, s in zip(decomp.atoms, decomp.states)
        ]
        report["atom_provenance"] = {
            "tolerance": 1e-8,
            "generic_element_seed": seed,
            "redraws": decomp.redraws,
            "state_repair_residual": decomp.state_repair_residual,
        }
    return report
