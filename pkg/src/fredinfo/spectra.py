"""Spectra and eigenbases of compact self-adjoint integral operators.

A :class:`SpectrumModel` describes a strictly decreasing eigenvalue sequence
``lambda_1 > lambda_2 > ...`` in ``(0, 1]`` together with (where available) the
orthonormal eigenbasis on the operator's natural domain.  Four kinds are
supported:

``poisson``
    ``lambda_k = (a/b)^|k|`` with ``0 < a < b``; Fourier basis
    ``psi_k(theta) = exp(-i k theta)`` on ``[-pi, pi]``, orthonormal under the
    normalized circle measure ``d(theta) / (2 pi)``.  Two-sided index set
    (``k = 0`` is the center mode with ``lambda_0 = 1``).
``heat``
    ``lambda_k = exp(-D k^2 (a - b))`` with ``D > 0`` and ``a > b``; same
    Fourier basis and index set as ``poisson``.
``green``
    ``lambda_k = 1 / (k^2 pi^2)``, basis ``sqrt(2) sin(k pi x)`` on ``[0, 1]``
    with the plain Lebesgue measure; one-sided index ``k >= 1``.  This is the
    eigensystem of the kernel ``K(x, y) = (1 - x) y`` for ``y <= x`` and
    ``x (1 - y)`` for ``x <= y``.
``tabulated``
    An explicit finite decreasing sequence of values in ``(0, 1]``; one-sided,
    no eigenbasis.  Equal values may optionally be grouped (see
    :func:`tabulated_model`), which is outside the strict-decrease assumption
    of the underlying theory and is flagged as such.

Eigenvalues are also exposed in the log2 domain so that counting and entropy
work stays exact far below the smallest positive float.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, UnsupportedError, ValidationError

__all__ = [
    "DEFAULT_K_MAX",
    "SpectrumModel",
    "poisson_model",
    "heat_model",
    "green_model",
    "tabulated_model",
    "CoefficientVector",
    "forward_apply",
    "EigenSystem",
    "nystrom_decompose",
    "green_kernel",
    "export_spectrum_csv",
    "model_to_json",
    "model_from_json",
]

DEFAULT_K_MAX = 256

_LOG2_PI = math.log2(math.pi)
_LOG2_E = math.log2(math.e)


@dataclass(frozen=True, eq=True)
class SpectrumModel:
    """Eigenvalue model of a compact self-adjoint operator.

    Instances are built through the ``*_model`` factory functions, which
    validate parameters.  ``k_max`` caps the length of any series work
    (coefficient vectors, channels, harness draws); it does not limit pure
    counting, which may scan past it.

    Attributes
    ----------
    kind : str
        One of ``poisson``, ``heat``, ``green``, ``tabulated``.
    params : dict
        Family parameters (see module docstring).
    k_max : int
        Largest retained one-sided index for series work.
    """

    kind: str
    params: dict
    k_max: int = DEFAULT_K_MAX

    # -- index bookkeeping -------------------------------------------------

    @property
    def index_scheme(self) -> str:
        """``"two_sided"`` for the Fourier families, else ``"one_sided"``."""
        return "two_sided" if self.kind in ("poisson", "heat") else "one_sided"

    @property
    def two_sided(self) -> bool:
        return self.index_scheme == "two_sided"

    def multiplicity(self, k: int) -> int:
        """Number of eigenfunctions sharing the eigenvalue at one-sided index k.

        Two-sided families report 1 for the center mode ``k = 0`` and 2 for
        ``k >= 1``.  Tabulated models report the group size (1 unless ties
        were explicitly allowed).
        """
        if self.two_sided:
            if k == 0:
                return 1
            self._check_index(k)
            return 2
        self._check_index(k)
        if self.kind == "tabulated":
            return int(self.params["multiplicities"][k - 1])
        return 1

    def _check_index(self, k: int) -> None:
        if not isinstance(k, (int, np.integer)):
            raise ValidationError(f"index k must be an integer, got {k!r}")
        if self.two_sided:
            return  # any integer addresses a mode via |k|
        if k < 1:
            raise ValidationError(
                f"one-sided model {self.kind!r} has indices k >= 1, got {k}")
        if self.kind == "tabulated" and k > self.spectrum_length:
            raise ValidationError(
                f"tabulated spectrum has {self.spectrum_length} values, got k={k}")

    @property
    def spectrum_length(self) -> int | None:
        """Number of available one-sided indices (None when unbounded)."""
        if self.kind == "tabulated":
            return len(self.params["values"])
        return None

    # -- eigenvalues --------------------------------------------------------

    def eigenvalue(self, k: int) -> float:
        """Eigenvalue at index ``k``.

        Two-sided models accept any integer (the value depends on ``|k|``;
        ``k = 0`` returns the center value 1).  One-sided models require
        ``k >= 1`` and, for tabulated spectra, ``k`` within range.
        """
        self._check_index(k)
        k = abs(int(k))
        if k == 0:
            return 1.0
        return float(self.eigenvalues(np.asarray([k]))[0])

    def eigenvalues(self, ks: np.ndarray) -> np.ndarray:
        """Vectorized eigenvalues for an array of one-sided indices >= 1."""
        ks = np.asarray(ks, dtype=np.int64)
        if self.kind == "poisson":
            a, b = self.params["a"], self.params["b"]
            return (a / b) ** ks.astype(float)
        if self.kind == "heat":
            D, a, b = self.params["D"], self.params["a"], self.params["b"]
            return np.exp(-D * (a - b) * ks.astype(float) ** 2)
        if self.kind == "green":
            return 1.0 / (ks.astype(float) ** 2 * math.pi ** 2)
        values = self.params["values"]
        if ks.size and (ks.min() < 1 or ks.max() > len(values)):
            raise ValidationError("tabulated index out of range")
        return np.asarray(values, dtype=float)[ks - 1]

    def log2_eigenvalues(self, ks: np.ndarray) -> np.ndarray:
        """``log2(lambda_k)`` evaluated directly in the log domain.

        Exact for arbitrarily small eigenvalues; never forms ``lambda_k``
        itself, so no underflow occurs.
        """
        ks = np.asarray(ks, dtype=np.int64)
        if self.kind == "poisson":
            a, b = self.params["a"], self.params["b"]
            return -ks.astype(float) * math.log2(b / a)
        if self.kind == "heat":
            D, a, b = self.params["D"], self.params["a"], self.params["b"]
            return -D * (a - b) * ks.astype(float) ** 2 * _LOG2_E
        if self.kind == "green":
            return -2.0 * np.log2(ks.astype(float)) - 2.0 * _LOG2_PI
        return np.log2(self.eigenvalues(ks))

    @property
    def lambda_1(self) -> float:
        return self.eigenvalue(1)

    # -- eigenfunctions -----------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        """Support of the eigenfunctions."""
        if self.kind == "tabulated":
            raise UnsupportedError("tabulated models carry no eigenbasis")
        if self.two_sided:
            return (-math.pi, math.pi)
        return (0.0, 1.0)

    def eigenfunction_value(self, k: int, x: float) -> complex | float:
        """Value of the eigenfunction ``psi_k`` at a point of the domain.

        Fourier families return the complex exponential ``exp(-i k x)``
        (signed ``k``); the one-sided green family returns
        ``sqrt(2) sin(k pi x)``.  Points outside the domain raise a
        validation error, as does any index the model does not carry.
        """
        self._check_index(k)
        lo, hi = self.domain
        if not (lo - 1e-12 <= x <= hi + 1e-12):
            raise ValidationError(
                f"x={x!r} outside the eigenfunction domain [{lo}, {hi}]")
        if self.two_sided:
            return complex(np.exp(-1j * k * x))
        return math.sqrt(2.0) * math.sin(k * math.pi * x)

    def eigenfunction_matrix(self, ks: Sequence[int], xs: np.ndarray) -> np.ndarray:
        """Matrix ``[psi_k(x)]`` with one row per index, one column per point."""
        xs = np.asarray(xs, dtype=float)
        ks = np.asarray(ks, dtype=np.int64)
        if self.two_sided:
            return np.exp(-1j * np.outer(ks, xs))
        return math.sqrt(2.0) * np.sin(np.outer(ks, xs) * math.pi)

    def quadrature_weight(self) -> float:
        """Density of the orthonormality measure (1/(2 pi) on the circle)."""
        return 1.0 / (2.0 * math.pi) if self.two_sided else 1.0

    # -- serialization --------------------------------------------------------

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "k_max": self.k_max}
        obj.update({key: val for key, val in self.params.items()
                    if key != "multiplicities"})
        if self.kind == "tabulated":
            obj["values"] = list(self.params["values"])
            mults = self.params["multiplicities"]
            if any(m != 1 for m in mults):
                obj["multiplicities"] = list(mults)
        return obj


def poisson_model(a: float, b: float, k_max: int = DEFAULT_K_MAX) -> SpectrumModel:
    """Geometric spectrum ``(a/b)^|k|`` of the annulus-to-boundary map."""
    _check_k_max(k_max)
    if not (0 < a < b) or not math.isfinite(a) or not math.isfinite(b):
        raise ValidationError(f"poisson model needs 0 < a < b, got a={a}, b={b}")
    return SpectrumModel("poisson", {"a": float(a), "b": float(b)}, k_max)


def heat_model(D: float, a: float, b: float, k_max: int = DEFAULT_K_MAX) -> SpectrumModel:
    """Gaussian spectrum ``exp(-D k^2 (a-b))`` of backward heat recovery.

    ``a`` is the observation time, ``b < a`` the earlier reconstruction time.
    """
    _check_k_max(k_max)
    if not (D > 0 and math.isfinite(D)):
        raise ValidationError(f"heat model needs D > 0, got D={D}")
    if not (a > b) or not math.isfinite(a) or not math.isfinite(b):
        raise ValidationError(f"heat model needs a > b, got a={a}, b={b}")
    return SpectrumModel("heat", {"D": float(D), "a": float(a), "b": float(b)}, k_max)


def green_model(k_max: int = DEFAULT_K_MAX) -> SpectrumModel:
    """Power-law spectrum ``1/(k^2 pi^2)`` of the string Green kernel."""
    _check_k_max(k_max)
    return SpectrumModel("green", {}, k_max)


def tabulated_model(values: Sequence[float], allow_ties: bool = False,
                    k_max: int | None = None) -> SpectrumModel:
    """Explicit finite spectrum.

    ``values`` must lie in ``(0, 1]`` and decrease strictly.  With
    ``allow_ties=True`` equal neighbours are accepted and grouped into one
    index carrying a multiplicity — a bookkeeping extension that the
    strict-decrease theory does not cover, so it is off by default.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValidationError("tabulated model needs at least one value")
    for v in vals:
        if not (0.0 < v <= 1.0) or not math.isfinite(v):
            raise ValidationError(f"tabulated values must lie in (0, 1], got {v}")
    grouped: list[float] = []
    mults: list[int] = []
    for v in vals:
        if grouped and v == grouped[-1]:
            if not allow_ties:
                raise ValidationError(
                    f"tabulated values must decrease strictly (tie at {v}); "
                    "pass allow_ties=True to group equal values")
            mults[-1] += 1
            continue
        if grouped and v > grouped[-1]:
            raise ValidationError("tabulated values must be decreasing")
        grouped.append(v)
        mults.append(1)
    if k_max is None:
        k_max = len(grouped)
    _check_k_max(k_max)
    return SpectrumModel(
        "tabulated",
        {"values": tuple(grouped), "multiplicities": tuple(mults)},
        k_max,
    )


def _check_k_max(k_max: int) -> None:
    if not isinstance(k_max, (int, np.integer)) or k_max < 1:
        raise ValidationError(f"k_max must be a positive integer, got {k_max!r}")


# ---------------------------------------------------------------------------
# Coefficient vectors
# ---------------------------------------------------------------------------


@dataclass
class CoefficientVector:
    """Expansion coefficients of a function in a model's eigenbasis.

    One-sided models store ``(f_1, ..., f_K)``; two-sided models store
    ``(f_{-K}, ..., f_0, ..., f_K)`` (odd length).  The Euclidean norm of the
    entries equals the L2 norm of the represented function (the basis is
    orthonormal for the model's measure).
    """

    model: SpectrumModel
    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.atleast_1d(np.asarray(self.entries))
        if self.entries.ndim != 1 or self.entries.size == 0:
            raise ValidationError("entries must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(self.entries)):
            raise ValidationError("entries must be finite")
        if self.model.two_sided:
            if self.entries.size % 2 == 0:
                raise ValidationError(
                    "two-sided vectors have odd length (-K..K), got even length "
                    f"{self.entries.size}")
        K = self.K
        if K > self.model.k_max:
            raise ValidationError(
                f"vector reaches index {K} beyond the model's k_max={self.model.k_max}")
        length = self.model.spectrum_length
        if length is not None and K > length:
            raise ValidationError(
                f"vector reaches index {K} beyond the tabulated spectrum ({length})")

    @property
    def K(self) -> int:
        """Largest one-sided index covered by the vector."""
        n = self.entries.size
        return (n - 1) // 2 if self.model.two_sided else n

    @property
    def indices(self) -> np.ndarray:
        if self.model.two_sided:
            return np.arange(-self.K, self.K + 1)
        return np.arange(1, self.K + 1)

    def entry(self, k: int) -> complex | float:
        if self.model.two_sided:
            if abs(k) > self.K:
                raise ValidationError(f"index {k} outside stored range +-{self.K}")
            return self.entries[k + self.K]
        if not 1 <= k <= self.K:
            raise ValidationError(f"index {k} outside stored range 1..{self.K}")
        return self.entries[k - 1]

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries))

    def eigenvalue_profile(self) -> np.ndarray:
        """Eigenvalues aligned with :attr:`indices` (center mode -> 1)."""
        ks = np.abs(self.indices)
        lam = np.ones(ks.shape, dtype=float)
        pos = ks >= 1
        lam[pos] = self.model.eigenvalues(ks[pos])
        return lam

    def synthesize(self, xs: np.ndarray) -> np.ndarray:
        """Pointwise values ``sum_k f_k psi_k(x)`` on the model's domain."""
        mat = self.model.eigenfunction_matrix(self.indices, xs)
        return self.entries @ mat

    def same_basis(self, other: "CoefficientVector") -> bool:
        return self.model == other.model

    def require_same_basis(self, other: "CoefficientVector", what: str) -> None:
        if not self.same_basis(other):
            raise ValidationError(f"{what}: coefficient vectors use different bases")

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        complex_entries = np.iscomplexobj(self.entries)
        if complex_entries:
            ent = [[float(z.real), float(z.imag)] for z in self.entries]
        else:
            ent = [float(v) for v in self.entries]
        return {"model": self.model.to_json(), "complex": bool(complex_entries),
                "entries": ent}

    @classmethod
    def from_json(cls, obj: dict, model: SpectrumModel | None = None) -> "CoefficientVector":
        if not isinstance(obj, dict) or "entries" not in obj:
            raise ValidationError("coefficient vector JSON must contain 'entries'")
        if model is None:
            if "model" not in obj:
                raise ValidationError("coefficient vector JSON must embed a model")
            model = model_from_json(obj["model"])
        raw = obj["entries"]
        try:
            if obj.get("complex"):
                entries = np.asarray([complex(re, im) for re, im in raw])
            else:
                entries = np.asarray([float(v) for v in raw])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed coefficient entries: {exc}") from exc
        return cls(model, entries)


def forward_apply(model: SpectrumModel, f: CoefficientVector) -> CoefficientVector:
    """Image ``A f`` of a coefficient vector under the operator.

    Entry ``k`` is scaled by ``lambda_|k|`` (the center mode of two-sided
    models by ``lambda_0 = 1``).
    """
    if f.model != model:
        raise ValidationError("forward_apply: vector was built for a different model")
    return CoefficientVector(model, f.entries * f.eigenvalue_profile())


# ---------------------------------------------------------------------------
# Numerical eigensystems (Nystrom)
# ---------------------------------------------------------------------------


@dataclass
class EigenSystem:
    """Discrete approximation of an integral operator's eigensystem.

    ``eigenvectors[:, j]`` holds the values of the j-th eigenfunction at
    ``nodes`` and is orthonormal in the quadrature inner product
    ``sum_i w_i u_i v_i``.  Eigenvalues are sorted non-increasing and are
    non-negative (tiny negative round-off is clamped to zero).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray
    rule: str

    def eigenvalue(self, k: int) -> float:
        if not 1 <= k <= self.eigenvalues.size:
            raise ValidationError(f"eigensystem holds {self.eigenvalues.size} modes")
        return float(self.eigenvalues[k - 1])


def _quadrature_rule(n_nodes: int, rule: str) -> tuple[np.ndarray, np.ndarray]:
    if n_nodes < 2:
        raise ValidationError(f"n_nodes must be >= 2, got {n_nodes}")
    if rule == "trapezoid":
        x = np.linspace(0.0, 1.0, n_nodes)
        h = x[1] - x[0]
        w = np.full(n_nodes, h)
        w[0] = w[-1] = h / 2.0
        return x, w
    if rule == "gauss_legendre":
        t, w = np.polynomial.legendre.leggauss(n_nodes)
        return (t + 1.0) / 2.0, w / 2.0
    raise ValidationError(f"unknown quadrature rule {rule!r}")


def nystrom_decompose(kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      n_nodes: int = 2000,
                      rule: str = "trapezoid") -> EigenSystem:
    """Numerically diagonalize a symmetric kernel on ``[0, 1]``.

    The kernel matrix ``K_ij = kernel(x_i, x_j)`` is symmetrized with the
    square-root-of-weights similarity transform ``W^{1/2} K W^{1/2}`` so a
    symmetric eigensolver applies; eigenvector values at the nodes are then
    recovered as ``u / sqrt(w)``, which makes them weight-orthonormal.

    Parameters
    ----------
    kernel : callable
        Symmetric, broadcastable ``kernel(x, y)``.
    n_nodes : int
        Number of quadrature nodes.
    rule : str
        ``"trapezoid"`` or ``"gauss_legendre"``.

    Raises
    ------
    ValidationError
        Non-symmetric kernel, bad rule or too few nodes.
    NumericError
        Eigen-solver failure, or a spectrum that is negative beyond
        round-off (the supported operators are positive semi-definite).
    """
    nodes, weights = _quadrature_rule(n_nodes, rule)
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    Kmat = np.asarray(kernel(X, Y), dtype=float)
    if Kmat.shape != (n_nodes, n_nodes):
        raise ValidationError("kernel did not broadcast to an (n, n) matrix")
    if not np.all(np.isfinite(Kmat)):
        raise ValidationError("kernel produced non-finite values")
    scale = max(1.0, float(np.abs(Kmat).max()))
    if float(np.abs(Kmat - Kmat.T).max()) > 1e-12 * scale:
        raise ValidationError("kernel is not symmetric to 1e-12")

    sqrt_w = np.sqrt(weights)
    sym = (sqrt_w[:, None] * Kmat) * sqrt_w[None, :]
    sym = 0.5 * (sym + sym.T)  # scrub round-off asymmetry before eigh
    try:
        vals, vecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - hardware dependent
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc

    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]

    top = max(1.0, float(vals[0])) if vals.size else 1.0
    psd_tol = 64.0 * n_nodes * np.finfo(float).eps * top
    if vals.size and vals[-1] < -psd_tol:
        raise NumericError(
            f"operator has a negative eigenvalue {vals[-1]:.3e} beyond round-off; "
            "only positive semi-definite kernels are supported")
    vals = np.maximum(vals, 0.0)

    funcs = vecs / sqrt_w[:, None]
    # deterministic sign: largest-magnitude node value is positive
    for j in range(funcs.shape[1]):
        i = int(np.argmax(np.abs(funcs[:, j])))
        if funcs[i, j] < 0:
            funcs[:, j] = -funcs[:, j]
    return EigenSystem(vals, funcs, nodes, weights, rule)


def green_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """String Green kernel: ``(1-x) y`` for ``y <= x``, ``x (1-y)`` for ``x <= y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.where(y <= x, (1.0 - x) * y, x * (1.0 - y))


# ---------------------------------------------------------------------------
# Formats
# ---------------------------------------------------------------------------


def export_spectrum_csv(model: SpectrumModel, k_hi: int) -> str:
    """CSV of the spectrum prefix with columns ``k,lambda,multiplicity``."""
    if k_hi < 1:
        raise ValidationError(f"k_hi must be >= 1, got {k_hi}")
    length = model.spectrum_length
    if length is not None and k_hi > length:
        raise ValidationError(f"spectrum holds {length} values, asked for {k_hi}")
    out = io.StringIO()
    out.write("k,lambda,multiplicity\n")
    ks = np.arange(1, k_hi + 1)
    lams = model.eigenvalues(ks)
    for k, lam in zip(ks, lams):
        out.write(f"{k},{lam:.17g},{model.multiplicity(int(k))}\n")
    return out.getvalue()


def model_to_json(model: SpectrumModel) -> dict:
    return model.to_json()


def model_from_json(obj: dict) -> SpectrumModel:
    """Rebuild a model from its JSON form; malformed input raises ValidationError."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("model JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    k_max = obj.get("k_max", DEFAULT_K_MAX)
    try:
        if kind == "poisson":
            return poisson_model(obj["a"], obj["b"], k_max)
        if kind == "heat":
            return heat_model(obj["D"], obj["a"], obj["b"], k_max)
        if kind == "green":
            return green_model(k_max)
        if kind == "tabulated":
            values = obj["values"]
            mults = obj.get("multiplicities")
            if mults is not None:
                expanded: list[float] = []
                for v, m in zip(values, mults):
                    expanded.extend([v] * int(m))
                return tabulated_model(expanded, allow_ties=True, k_max=k_max)
            return tabulated_model(values, k_max=k_max)
    except KeyError as exc:
        raise ValidationError(f"model JSON missing field {exc}") from exc
    except TypeError as exc:
        raise ValidationError(f"malformed model JSON: {exc}") from exc
    raise ValidationError(f"unknown model kind {kind!r}")


def model_from_json_str(text: str) -> SpectrumModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc}") from exc
    return model_from_json(obj)
