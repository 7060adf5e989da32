"""Spectral-cutoff truncation of noisy first-kind equations.

Given noisy data ``g = A f + n`` with ``||n|| <= eps`` and ``||f|| <= 1``, the
regularized solution keeps exactly the components whose eigenvalue is not
below the noise level::

    k0(eps) = max { k : lambda_k >= eps }          (boundary included)
    f*      = sum_{k <= k0} (g_k / lambda_k) psi_k

``k0`` is computed by enumeration of the decreasing spectrum — that scan is
the ground truth the per-family closed forms are checked against.  Both
accept the noise level either as a plain float or as ``log2(1/eps)`` so that
levels far below the float underflow threshold stay usable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InconclusiveError, PreconditionError, ValidationError
from .spectra import CoefficientVector, SpectrumModel, forward_apply

__all__ = [
    "k0",
    "k0_closed_form",
    "generalized_k0",
    "TruncationReport",
    "truncated_solution",
    "BoundCheck",
    "Lemma1Report",
    "lemma1_check",
    "WeakConvergencePoint",
    "weak_convergence_probe",
]

_SCAN_CAP = 1 << 22
_SLACK = 1.0 + 1e-12

_LN2 = math.log(2.0)


def _resolve_eps(epsilon: float | None, log2_inv_eps: float | None):
    """Normalize the two accepted noise-level forms.

    Returns ``(mode, value)`` where mode is ``"linear"`` (value = eps > 0) or
    ``"log2"`` (value = log2(1/eps), any finite float).  Exactly one of the
    two arguments must be given.
    """
    if (epsilon is None) == (log2_inv_eps is None):
        raise ValidationError("give exactly one of epsilon or log2_inv_eps")
    if epsilon is not None:
        eps = float(epsilon)
        if not (eps > 0.0) or not math.isfinite(eps):
            raise ValidationError(f"epsilon must be a positive finite float, got {epsilon!r}")
        return "linear", eps
    L = float(log2_inv_eps)
    if not math.isfinite(L):
        raise ValidationError(f"log2_inv_eps must be finite, got {log2_inv_eps!r}")
    return "log2", L


def _log2_inv(mode: str, value: float) -> float:
    """log2(1/eps) for either input mode."""
    return -math.log2(value) if mode == "linear" else value


def k0(model: SpectrumModel, epsilon: float | None = None, *,
       log2_inv_eps: float | None = None) -> int:
    """Cutoff index: largest k with ``lambda_k >= eps`` (0 if none).

    Enumerative ground truth: scans the decreasing spectrum in vectorized
    blocks, comparing in the same domain the noise level was supplied in
    (floats compare as floats, exponents compare in log2).  For tabulated
    models the scan stops at the end of the table, so a level below every
    value counts the whole finite spectrum.

    Raises
    ------
    InconclusiveError
        The cutoff exceeds the enumeration safety cap (2**22).
    """
    mode, value = _resolve_eps(epsilon, log2_inv_eps)
    length = model.spectrum_length
    hard_cap = length if length is not None else _SCAN_CAP

    count = 0
    start = 1
    block = 1024
    while start <= hard_cap:
        stop = min(start + block - 1, hard_cap)
        ks = np.arange(start, stop + 1)
        if mode == "linear":
            ok = model.eigenvalues(ks) >= value
        else:
            ok = model.log2_eigenvalues(ks) >= -value
        if not ok.all():
            first_bad = int(np.argmin(ok))  # spectrum decreasing -> first failure is final
            return start + first_bad - 1
        count = stop
        start = stop + 1
        block *= 2
    if length is not None:
        return count
    raise InconclusiveError(
        f"k0 exceeds the enumeration cap {_SCAN_CAP}; the noise level is too "
        "small for this spectrum's decay")


def k0_closed_form(model: SpectrumModel, epsilon: float | None = None, *,
                   log2_inv_eps: float | None = None) -> int:
    """Printed closed-form cutoff for the three analytic families.

    * poisson: ``floor(log(1/eps) / log(b/a))`` — any log base (a ratio).
    * heat: ``floor(sqrt(log(1/eps) / (D (a-b))))`` — evaluated with the
      natural log; the dimensionally consistent reading, and the one that
      agrees with enumeration (a base-2 reading overcounts).
    * green: ``floor(1 / (pi sqrt(eps)))``.

    Must equal :func:`k0` except possibly at exact boundary ties, which the
    floor resolves toward inclusion.
    """
    mode, value = _resolve_eps(epsilon, log2_inv_eps)
    L2 = _log2_inv(mode, value)  # log2(1/eps)
    if model.kind == "poisson":
        a, b = model.params["a"], model.params["b"]
        x = L2 / math.log2(b / a)
        return max(0, math.floor(x))
    if model.kind == "heat":
        D, a, b = model.params["D"], model.params["a"], model.params["b"]
        t = L2 * _LN2 / (D * (a - b))  # ln(1/eps) / (D (a-b))
        if t < 0.0:
            return 0
        return math.floor(math.sqrt(t))
    if model.kind == "green":
        if mode == "linear":
            return max(0, math.floor(1.0 / (math.pi * math.sqrt(value))))
        if L2 > 2000.0:
            raise InconclusiveError(
                "green closed-form cutoff overflows floats at this exponent")
        return max(0, math.floor(2.0 ** (L2 / 2.0) / math.pi))
    raise ValidationError(f"no closed-form cutoff for kind {model.kind!r}")


def generalized_k0(model: SpectrumModel,
                   beta: Callable[[int], float] | Sequence[float],
                   epsilon: float) -> int:
    """Largest k with ``lambda_k >= eps * beta_k`` for a positive sequence beta.

    The scan runs over ``k = 1..K_max`` (or the length of ``beta`` when a
    finite sequence is shorter) and must see the condition fail before the
    end — otherwise the answer cannot be certified and an
    :class:`InconclusiveError` is raised rather than silently truncating.
    """
    _, eps = _resolve_eps(epsilon, None)
    limit = model.k_max
    if model.spectrum_length is not None:
        limit = min(limit, model.spectrum_length)
    if not callable(beta):
        seq = [float(v) for v in beta]
        if not seq:
            raise ValidationError("beta sequence is empty")
        limit = min(limit, len(seq))
        beta_fn = lambda k: seq[k - 1]
    else:
        beta_fn = beta

    ks = np.arange(1, limit + 1)
    betas = np.asarray([float(beta_fn(int(k))) for k in ks])
    if not np.all(np.isfinite(betas)) or np.any(betas <= 0):
        raise ValidationError("beta must be positive and finite on 1..K_max")
    ok = model.eigenvalues(ks) >= eps * betas
    last = int(ks[ok][-1]) if ok.any() else 0
    if last == limit:
        raise InconclusiveError(
            f"lambda_k >= eps*beta_k still holds at k={limit}; no crossing "
            "found within K_max")
    return last


# ---------------------------------------------------------------------------
# Truncated solutions
# ---------------------------------------------------------------------------


@dataclass
class TruncationReport:
    """Result of one truncation: cutoff, estimator and optional diagnostics.

    ``residual_y`` = ||A(f - f*)||, ``distance_x`` = ||f - f*||,
    ``combined`` = residual_y**2 + eps**2 * distance_x**2; present only when a
    reference solution was supplied.
    """

    epsilon: float
    k0: int
    f_star: CoefficientVector
    residual_y: float | None = None
    distance_x: float | None = None
    combined: float | None = None

    def to_json(self) -> dict:
        obj = {"epsilon": self.epsilon, "k0": self.k0,
               "f_star": self.f_star.to_json()}
        if self.residual_y is not None:
            obj["residual_y"] = self.residual_y
            obj["distance_x"] = self.distance_x
            obj["combined"] = self.combined
        return obj


def _retained_mask(model: SpectrumModel, vec: CoefficientVector, eps: float) -> np.ndarray:
    """Boolean mask of the entries kept by the cutoff, per |k|.

    The center mode of two-sided models is governed by ``lambda_0 = 1``.
    """
    lam = vec.eigenvalue_profile()
    return lam >= eps


def truncated_solution(model: SpectrumModel, data: CoefficientVector,
                       epsilon: float,
                       reference: CoefficientVector | None = None) -> TruncationReport:
    """Spectral-cutoff estimator ``f*`` from noisy data coefficients.

    Entries with ``lambda_|k| >= eps`` are inverted (``g_k / lambda_k``), the
    rest are zeroed.  The reported ``k0`` is the cutoff capped at the data's
    own index range (coefficients the data does not carry cannot be
    inverted).  When ``reference`` is supplied the report carries the
    distance diagnostics used by the error bounds.
    """
    _, eps = _resolve_eps(epsilon, None)
    if data.model != model:
        raise ValidationError("truncated_solution: data uses a different model")
    cut = k0(model, eps)
    mask = _retained_mask(model, data, eps)
    lam = data.eigenvalue_profile()
    entries = np.where(mask, data.entries / lam, np.zeros_like(data.entries))
    f_star = CoefficientVector(model, entries)
    report = TruncationReport(epsilon=eps, k0=min(cut, data.K), f_star=f_star)
    if reference is not None:
        reference.require_same_basis(data, "truncated_solution")
        diff = reference.entries - _aligned(f_star, reference)
        lam_ref = reference.eigenvalue_profile()
        report.residual_y = float(np.linalg.norm(lam_ref * diff))
        report.distance_x = float(np.linalg.norm(diff))
        report.combined = report.residual_y ** 2 + eps ** 2 * report.distance_x ** 2
    return report


def _aligned(vec: CoefficientVector, like: CoefficientVector) -> np.ndarray:
    """Entries of ``vec`` padded/truncated to the index range of ``like``."""
    if vec.K == like.K:
        return vec.entries
    out = np.zeros(like.entries.shape, dtype=vec.entries.dtype)
    if vec.model.two_sided:
        K = min(vec.K, like.K)
        out[like.K - K: like.K + K + 1] = vec.entries[vec.K - K: vec.K + K + 1]
    else:
        K = min(vec.K, like.K)
        out[:K] = vec.entries[:K]
    return out


# ---------------------------------------------------------------------------
# Error-bound checks
# ---------------------------------------------------------------------------


@dataclass
class BoundCheck:
    value: float
    bound: float
    holds: bool


@dataclass
class Lemma1Report:
    """The three truncation-error bounds, each as (value, bound, holds)."""

    residual_y: BoundCheck
    distance_x: BoundCheck
    combined: BoundCheck
    data_misfit: float
    f_norm: float

    @property
    def all_hold(self) -> bool:
        return self.residual_y.holds and self.distance_x.holds and self.combined.holds


def lemma1_check(model: SpectrumModel, f: CoefficientVector,
                 data: CoefficientVector, epsilon: float) -> Lemma1Report:
    """Verify the a-priori truncation bounds on one (f, data, eps) triple.

    Preconditions ``||A f - data|| <= eps`` and ``||f|| <= 1`` are enforced
    first (raising :class:`PreconditionError` with the measured norms).  The
    three checked bounds are::

        ||A (f - f*)||   <= sqrt(2) eps
        ||f - f*||       <= sqrt(2)
        ||A (f - f*)||^2 + eps^2 ||f - f*||^2  <= 4 eps^2
    """
    _, eps = _resolve_eps(epsilon, None)
    if f.model != model or data.model != model:
        raise ValidationError("lemma1_check: vectors use a different model")
    f.require_same_basis(data, "lemma1_check")
    if f.K != data.K:
        raise ValidationError("lemma1_check: f and data must cover the same indices")

    misfit = float(np.linalg.norm(forward_apply(model, f).entries - data.entries))
    f_norm = f.norm()
    if misfit > eps * _SLACK:
        raise PreconditionError(
            f"data misfit ||Af - g|| = {misfit:.6g} exceeds eps = {eps:.6g}",
            data_misfit=misfit, f_norm=f_norm)
    if f_norm > _SLACK:
        raise PreconditionError(
            f"||f|| = {f_norm:.6g} exceeds 1", data_misfit=misfit, f_norm=f_norm)

    f_star = truncated_solution(model, data, eps).f_star
    diff = f.entries - f_star.entries
    lam = f.eigenvalue_profile()
    residual = float(np.linalg.norm(lam * diff))
    distance = float(np.linalg.norm(diff))
    combined = residual ** 2 + eps ** 2 * distance ** 2

    b_res = math.sqrt(2.0) * eps
    b_dist = math.sqrt(2.0)
    b_comb = 4.0 * eps ** 2
    return Lemma1Report(
        residual_y=BoundCheck(residual, b_res, residual <= b_res * _SLACK),
        distance_x=BoundCheck(distance, b_dist, distance <= b_dist * _SLACK),
        combined=BoundCheck(combined, b_comb, combined <= b_comb * _SLACK),
        data_misfit=misfit,
        f_norm=f_norm,
    )


# ---------------------------------------------------------------------------
# Weak convergence probe
# ---------------------------------------------------------------------------


@dataclass
class WeakConvergencePoint:
    epsilon: float
    value: float      # |(f - f*, v)|
    majorant: float   # 2 eps sqrt(sum |v_k|^2 / (lambda_k^2 + eps^2))


def weak_convergence_probe(model: SpectrumModel, f: CoefficientVector,
                           v: CoefficientVector,
                           epsilons: Sequence[float],
                           datas: Sequence[CoefficientVector]) -> list[WeakConvergencePoint]:
    """Track ``|(f - f*, v)|`` along a decreasing noise grid.

    Each grid level must come with a data vector satisfying the noisy-model
    preconditions at that level; the probe evaluates the pairing against the
    test vector ``v`` (``||v|| <= 1``) together with its closed-form majorant,
    which the pairing never exceeds.
    """
    if f.model != model or v.model != model:
        raise ValidationError("weak_convergence_probe: vectors use a different model")
    if v.K != f.K:
        raise ValidationError("f and v must cover the same indices")
    if len(epsilons) != len(datas):
        raise ValidationError("need one data vector per epsilon")
    if len(epsilons) < 2:
        raise ValidationError("need at least two grid points")
    eps_arr = [float(e) for e in epsilons]
    if any(not (e > 0) for e in eps_arr):
        raise ValidationError("epsilons must be positive")
    if any(e2 >= e1 for e1, e2 in zip(eps_arr, eps_arr[1:])):
        raise ValidationError("epsilons must decrease strictly")
    if v.norm() > _SLACK:
        raise ValidationError(f"test vector norm {v.norm():.6g} exceeds 1")

    lam = v.eigenvalue_profile()
    out = []
    for eps, data in zip(eps_arr, datas):
        if data.model != model or data.K != f.K:
            raise ValidationError("data vectors must match the model and index range of f")
        misfit = float(np.linalg.norm(forward_apply(model, f).entries - data.entries))
        if misfit > eps * _SLACK:
            raise PreconditionError(
                f"data misfit {misfit:.6g} exceeds eps = {eps:.6g} at a grid point",
                data_misfit=misfit, f_norm=f.norm())
        f_star = truncated_solution(model, data, eps).f_star
        diff = f.entries - f_star.entries
        value = abs(complex(np.vdot(v.entries, diff)))
        majorant = 2.0 * eps * math.sqrt(
            float(np.sum(np.abs(v.entries) ** 2 / (lam ** 2 + eps ** 2))))
        out.append(WeakConvergencePoint(eps, float(value), majorant))
    return out
