"""Per-component Gaussian channels over a compact operator's spectrum.

The source places independent priors ``xi_k ~ N(0, rho_k^2)`` on the
components of the unknown, and the observation of component ``k`` is::

    eta_k = lambda_k xi_k + zeta_k,    zeta_k ~ N(0, eps^2 nu_k^2)

Everything in this module is a per-component sum over the one-sided index
``k = 1..K_max`` (the sequence form of the problem).  Components split into
the informative set ``I = {k : lambda_k rho_k >= eps nu_k}`` — exactly the
components whose squared correlation reaches 1/2, i.e. whose information
``J_k = -(1/2) ln(1 - r_k^2)`` reaches ``(1/2) ln 2`` — and its complement
``N``.  Sums are evaluated in the order of strictly decreasing signal-to-noise
ratio ``lambda_k rho_k / nu_k`` (ties are rejected); for every monotone family
in scope this is the natural order.

Internal units are nats; conversion to bits happens at reporting boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .errors import UnsupportedError, ValidationError
from .metric import entropy_lower_bound
from .spectra import CoefficientVector, SpectrumModel
from .truncation import k0

__all__ = [
    "VarianceRule",
    "constant_rule",
    "geometric_rule",
    "power_rule",
    "gaussian_rule",
    "inverse_spectrum_rule",
    "custom_rule",
    "GaussianChannel",
    "ComponentInfo",
    "component_information",
    "Partition",
    "partition_IN",
    "posterior_estimate",
    "PosteriorParams",
    "posterior_density_params",
    "mse_closed_form",
    "k_alpha",
    "TotalInformation",
    "total_information",
    "ExtremalComparison",
    "extremal_comparison",
]

_HALF_LN2 = 0.5 * math.log(2.0)


# ---------------------------------------------------------------------------
# Variance rules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceRule:
    """Structured standard-deviation sequence ``k -> sigma_k > 0``.

    The structured families carry exact (or machine-precision certified)
    closed forms for ``sum_k sigma_k^2`` and its tails, which is what makes
    closed-form risk and budget computations exact:

    * ``constant``: ``c`` — not summable.
    * ``geometric``: ``c q^k`` (0 < q < 1) — geometric series.
    * ``power``: ``c k^-p`` (p > 0) — Hurwitz zeta; summable when ``2p > 1``.
    * ``gaussian``: ``c exp(-s k^2)`` (s > 0) — super-geometric partial sums
      (the first omitted term already bounds the remainder below float
      resolution at the summation depth used).
    * ``inverse_spectrum``: ``(1 + delta0/k) / lambda_k`` for a model —
      grows, never summable.
    * ``custom``: explicit per-k values; summable only with a declared tail.
    """

    kind: str
    params: dict = field(default_factory=dict)

    # -- values -------------------------------------------------------------

    def value(self, k: int) -> float:
        return float(self.values(np.asarray([k]))[0])

    def values(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        kind = self.kind
        if kind == "constant":
            return np.full(ks.shape, self.params["c"], dtype=float)
        if kind == "geometric":
            return self.params["c"] * self.params["q"] ** ks.astype(float)
        if kind == "power":
            if np.any(ks < 1):
                raise ValidationError("power rule is defined for k >= 1")
            return self.params["c"] * ks.astype(float) ** (-self.params["p"])
        if kind == "gaussian":
            return self.params["c"] * np.exp(-self.params["s"] * ks.astype(float) ** 2)
        if kind == "inverse_spectrum":
            if np.any(ks < 1):
                raise ValidationError("inverse_spectrum rule is defined for k >= 1")
            model: SpectrumModel = self.params["model"]
            delta = self.params["delta0"] / ks.astype(float)
            return (1.0 + delta) / model.eigenvalues(ks)
        if kind == "custom":
            vals = self.params["values"]
            if np.any(ks < 1) or np.any(ks > len(vals)):
                raise ValidationError(
                    f"custom rule holds {len(vals)} values, index out of range")
            return np.asarray(vals, dtype=float)[ks - 1]
        raise ValidationError(f"unknown variance rule kind {kind!r}")

    # -- second-moment sums ---------------------------------------------------

    @property
    def is_trace_class(self) -> bool:
        kind = self.kind
        if kind == "geometric" or kind == "gaussian":
            return True
        if kind == "power":
            return 2.0 * self.params["p"] > 1.0
        if kind == "custom":
            return self.params["tail_sum_sq"] is not None
        return False

    def sum_sq_total(self) -> float:
        """``sum_{k>=1} sigma_k^2`` (the prior energy Gamma, when finite)."""
        return self.sum_sq_tail(0)

    def sum_sq_tail(self, m: int) -> float:
        """``sum_{k>m} sigma_k^2`` in closed form (m >= 0)."""
        if m < 0:
            raise ValidationError("tail start must be >= 0")
        if not self.is_trace_class:
            raise UnsupportedError(
                f"{self.kind} rule is not trace class; tail sums diverge")
        kind = self.kind
        if kind == "geometric":
            c, q = self.params["c"], self.params["q"]
            q2 = q * q
            return c * c * q2 ** (m + 1) / (1.0 - q2)
        if kind == "power":
            c, p = self.params["c"], self.params["p"]
            return c * c * float(_hurwitz_zeta(2.0 * p, m + 1))
        if kind == "gaussian":
            c, s = self.params["c"], self.params["s"]
            total = 0.0
            k = m + 1
            while True:
                term = math.exp(-2.0 * s * k * k)
                total += term
                if term < 1e-320 or term < 1e-18 * total:
                    break
                k += 1
            return c * c * total
        # custom
        vals = np.asarray(self.params["values"], dtype=float)
        tail = float(self.params["tail_sum_sq"])
        if m >= len(vals):
            if m > len(vals):
                raise ValidationError(
                    "custom rule cannot start a tail beyond its declared values")
            return tail
        return float(np.sum(vals[m:] ** 2)) + tail


def _positive(name: str, v: float) -> float:
    v = float(v)
    if not (v > 0) or not math.isfinite(v):
        raise ValidationError(f"{name} must be positive and finite, got {v!r}")
    return v


def constant_rule(c: float) -> VarianceRule:
    return VarianceRule("constant", {"c": _positive("c", c)})


def geometric_rule(c: float, q: float) -> VarianceRule:
    q = _positive("q", q)
    if q >= 1.0:
        raise ValidationError(f"geometric ratio must satisfy 0 < q < 1, got {q}")
    return VarianceRule("geometric", {"c": _positive("c", c), "q": q})


def power_rule(c: float, p: float) -> VarianceRule:
    return VarianceRule("power", {"c": _positive("c", c), "p": _positive("p", p)})


def gaussian_rule(c: float, s: float) -> VarianceRule:
    return VarianceRule("gaussian", {"c": _positive("c", c), "s": _positive("s", s)})


def inverse_spectrum_rule(model: SpectrumModel, delta0: float = 1e-9) -> VarianceRule:
    return VarianceRule("inverse_spectrum",
                        {"model": model, "delta0": _positive("delta0", delta0)})


def custom_rule(values: Sequence[float], tail_sum_sq: float | None = None) -> VarianceRule:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise ValidationError("custom rule needs at least one value")
    if any(not (v > 0) or not math.isfinite(v) for v in vals):
        raise ValidationError("custom rule values must be positive and finite")
    if tail_sum_sq is not None:
        tail_sum_sq = float(tail_sum_sq)
        if tail_sum_sq < 0 or not math.isfinite(tail_sum_sq):
            raise ValidationError("declared tail must be a finite non-negative float")
    return VarianceRule("custom", {"values": vals, "tail_sum_sq": tail_sum_sq})


_RULE_FACTORIES = {
    "constant": (constant_rule, ("c",)),
    "geometric": (geometric_rule, ("c", "q")),
    "power": (power_rule, ("c", "p")),
    "gaussian": (gaussian_rule, ("c", "s")),
}


def rule_to_json(rule: VarianceRule) -> dict:
    if rule.kind == "inverse_spectrum":
        from .spectra import model_to_json
        return {"kind": rule.kind, "delta0": rule.params["delta0"],
                "model": model_to_json(rule.params["model"])}
    if rule.kind == "custom":
        return {"kind": "custom", "values": list(rule.params["values"]),
                "tail_sum_sq": rule.params["tail_sum_sq"]}
    obj = {"kind": rule.kind}
    obj.update(rule.params)
    return obj


def rule_from_json(obj: dict) -> VarianceRule:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValidationError("variance rule JSON must carry a 'kind'")
    kind = obj["kind"]
    try:
        if kind in _RULE_FACTORIES:
            factory, names = _RULE_FACTORIES[kind]
            return factory(*[obj[name] for name in names])
        if kind == "custom":
            return custom_rule(obj["values"], obj.get("tail_sum_sq"))
        if kind == "inverse_spectrum":
            from .spectra import model_from_json
            return inverse_spectrum_rule(model_from_json(obj["model"]),
                                         obj.get("delta0", 1e-9))
    except KeyError as exc:
        raise ValidationError(f"variance rule JSON missing field {exc}") from exc
    raise ValidationError(f"unknown variance rule kind {kind!r}")


# ---------------------------------------------------------------------------
# Channel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianChannel:
    """Prior, noise and spectrum bundled over components ``k = 1..k_max``.

    Construction validates positivity of all sigmas and pairwise
    distinctness of the signal-to-noise ratios ``lambda_k rho_k / nu_k``
    (ties would make the informative count ambiguous).
    """

    model: SpectrumModel
    rho: VarianceRule
    nu: VarianceRule
    epsilon: float
    k_max: int | None = None

    def __post_init__(self):
        eps = float(self.epsilon)
        if eps < 0 or not math.isfinite(eps):
            raise ValidationError(f"epsilon must be >= 0 and finite, got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)
        km = self.model.k_max if self.k_max is None else int(self.k_max)
        if km < 1:
            raise ValidationError(f"k_max must be >= 1, got {self.k_max!r}")
        length = self.model.spectrum_length
        if length is not None and km > length:
            raise ValidationError(
                f"k_max={km} exceeds the tabulated spectrum length {length}")
        object.__setattr__(self, "k_max", km)

        ks = np.arange(1, km + 1)
        lam = self.model.eigenvalues(ks)
        if np.any(lam <= 0.0):
            first = int(ks[lam <= 0.0][0])
            raise ValidationError(
                f"lambda_{first} underflows to zero; lower k_max below {first} "
                "(the channel needs representable eigenvalues)")
        rho = self.rho.values(ks)
        nu = self.nu.values(ks)
        for name, arr in (("rho", rho), ("nu", nu)):
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
                raise ValidationError(f"{name}_k must be positive and finite on 1..k_max")
        ratios = lam * rho / nu
        if np.unique(ratios).size != ratios.size:
            raise ValidationError(
                "signal-to-noise ratios lambda_k rho_k / nu_k must be pairwise "
                "distinct; tie detected")
        object.__setattr__(self, "_lam", lam)
        object.__setattr__(self, "_rho", rho)
        object.__setattr__(self, "_nu", nu)
        object.__setattr__(self, "_ratios", ratios)
        # stable descending sort of the ratios = the rearranged component order
        order = np.argsort(-ratios, kind="stable")
        object.__setattr__(self, "_order", order + 1)  # 1-based component labels

    # cached arrays (populated in __post_init__)
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self._lam, self._rho, self._nu  # type: ignore[attr-defined]

    @property
    def ordering(self) -> np.ndarray:
        """Component labels sorted by strictly decreasing lambda rho / nu."""
        return self._order  # type: ignore[attr-defined]

    def _component(self, k: int) -> tuple[float, float, float]:
        if not 1 <= k <= self.k_max:
            raise ValidationError(f"component index must lie in 1..{self.k_max}")
        lam, rho, nu = self.arrays()
        return float(lam[k - 1]), float(rho[k - 1]), float(nu[k - 1])


# ---------------------------------------------------------------------------
# Component information and partition
# ---------------------------------------------------------------------------


@dataclass
class ComponentInfo:
    """Correlation and information carried by one observed component."""

    k: int
    r_squared: float
    J_nats: float
    in_I: bool

    def to_json(self) -> dict:
        return {"k": self.k, "r_squared": self.r_squared,
                "J_nats": self.J_nats, "in_I": self.in_I}


def _info_from_ratio(ratio: float) -> tuple[float, float]:
    """(r^2, J) computed stably from the SNR ``ratio = lam rho / (eps nu)``."""
    if ratio <= 1.0:
        r2 = ratio * ratio / (1.0 + ratio * ratio)
        J = 0.5 * math.log1p(ratio * ratio)
    else:
        u = 1.0 / ratio
        r2 = 1.0 / (1.0 + u * u)
        J = math.log(ratio) + 0.5 * math.log1p(u * u)
    return min(r2, float(np.nextafter(1.0, 0.0))), J


def component_information(channel: GaussianChannel, k: int) -> ComponentInfo:
    """Squared correlation and Shannon information of component ``k`` (nats).

    ``r_k^2 = (lam rho)^2 / ((lam rho)^2 + (eps nu)^2)`` and
    ``J_k = -(1/2) ln(1 - r_k^2) = (1/2) ln(1 + (lam rho / eps nu)^2)``.
    Membership in I means ``lam rho >= eps nu``, equivalently ``J_k >= (1/2) ln 2``
    (the boundary carries exactly half a ln 2).
    """
    if channel.epsilon <= 0.0:
        raise ValidationError("component information requires epsilon > 0")
    lam, rho, nu = channel._component(k)
    signal = lam * rho
    noise = channel.epsilon * nu
    r2, J = _info_from_ratio(signal / noise)
    return ComponentInfo(k=k, r_squared=r2, J_nats=J, in_I=signal >= noise)


@dataclass
class Partition:
    """Informative/noise split of the components.

    ``ordering`` lists component labels by strictly decreasing
    ``lambda rho / nu``; its first ``k_I`` labels are exactly ``I``.
    """

    I: tuple[int, ...]
    N: tuple[int, ...]
    k_I: int
    ordering: tuple[int, ...]


def partition_IN(channel: GaussianChannel) -> Partition:
    """Split components into informative set I and remainder N.

    Membership: ``lambda_k rho_k >= eps nu_k`` (boundary included).  With
    ``eps = 0`` every component is informative and ``k_I = k_max`` stands in
    for infinity.
    """
    lam, rho, nu = channel.arrays()
    member = lam * rho >= channel.epsilon * nu
    order = channel.ordering
    member_sorted = member[order - 1]
    k_I = int(np.sum(member))
    if k_I and not bool(member_sorted[:k_I].all()):
        # impossible for a threshold rule on the sorted ratios
        raise ValidationError("informative set is not an initial segment of the ordering")
    I = tuple(int(k) for k in np.flatnonzero(member) + 1)
    N = tuple(int(k) for k in np.flatnonzero(~member) + 1)
    return Partition(I=I, N=N, k_I=k_I, ordering=tuple(int(k) for k in order))


def posterior_estimate(channel: GaussianChannel, data: CoefficientVector) -> CoefficientVector:
    """Component-wise posterior-mode estimator from observed coefficients.

    Informative components are inverted (``eta_k / lambda_k``), the rest are
    zeroed.  For two-sided basis models membership is applied per ``|k|``
    with the variance rules evaluated at ``|k|`` (the center mode uses the
    rules at 0 and ``lambda_0 = 1``).
    """
    if data.model != channel.model:
        raise ValidationError("posterior_estimate: data uses a different model")
    if data.K > channel.k_max:
        raise ValidationError(
            f"data reaches index {data.K} beyond the channel's k_max={channel.k_max}")
    ks = np.abs(data.indices)
    lam = data.eigenvalue_profile()
    rho = np.empty(ks.shape, dtype=float)
    nu = np.empty(ks.shape, dtype=float)
    pos = ks >= 1
    rho[pos] = channel.rho.values(ks[pos])
    nu[pos] = channel.nu.values(ks[pos])
    if np.any(~pos):  # center mode of a two-sided vector
        rho[~pos] = channel.rho.value(0)
        nu[~pos] = channel.nu.value(0)
    member = lam * rho >= channel.epsilon * nu
    entries = np.where(member, data.entries / lam, np.zeros_like(data.entries))
    return CoefficientVector(channel.model, entries)


@dataclass
class PosteriorParams:
    """Gaussian pair (prior-marginal, data-conditional) for one component."""

    mean1: float
    var1: float
    mean2: float
    var2: float


def posterior_density_params(channel: GaussianChannel, k: int,
                             g_k: float) -> PosteriorParams:
    """Parameters of the two Gaussians attached to component ``k``.

    The prior marginal is ``N(0, rho_k^2)``; conditioning on the observation
    ``g_k`` gives ``N(g_k / lambda_k, (eps nu_k / lambda_k)^2)``.  The
    conditional variance is the smaller of the two exactly on I.
    """
    lam, rho, nu = channel._component(k)
    return PosteriorParams(
        mean1=0.0,
        var1=rho * rho,
        mean2=float(g_k) / lam,
        var2=(channel.epsilon * nu / lam) ** 2,
    )


# ---------------------------------------------------------------------------
# Risk and information budgets
# ---------------------------------------------------------------------------


def _require_trace_class(channel: GaussianChannel, what: str) -> None:
    if not channel.rho.is_trace_class:
        raise UnsupportedError(
            f"{what} requires a trace-class prior (sum rho_k^2 < inf); "
            f"the {channel.rho.kind} rule is not")


def mse_closed_form(channel: GaussianChannel) -> float:
    """Exact mean squared error of the informative-set estimator.

    ``sum_{k in N} rho_k^2  +  (tail beyond k_max)  +  sum_{k in I} (eps nu_k / lambda_k)^2``
    — dropped components cost their prior energy, inverted ones their noise
    amplification.  Requires a trace-class prior.
    """
    _require_trace_class(channel, "mse_closed_form")
    part = partition_IN(channel)
    lam, rho, nu = channel.arrays()
    dropped = float(np.sum(rho[np.asarray(part.N, dtype=int) - 1] ** 2)) if part.N else 0.0
    dropped += channel.rho.sum_sq_tail(channel.k_max)
    if part.I:
        idx = np.asarray(part.I, dtype=int) - 1
        inverted = float(np.sum((channel.epsilon * nu[idx] / lam[idx]) ** 2))
    else:
        inverted = 0.0
    return dropped + inverted


def k_alpha(channel: GaussianChannel) -> int:
    """Largest component count whose total risk stays within the prior energy.

    With ``Gamma = sum_k rho_k^2``, returns the largest ``m <= k_max`` such
    that ``sum_{k <= m} (rho_k^2 + eps^2 nu_k^2 / lambda_k^2) <= Gamma``,
    accumulated in the rearranged (decreasing-ratio) order; 0 when even the
    first component overshoots, ``k_max`` when no prefix does (the ``eps = 0``
    surrogate for infinity).
    """
    _require_trace_class(channel, "k_alpha")
    gamma = channel.rho.sum_sq_total()
    lam, rho, nu = channel.arrays()
    order = channel.ordering - 1
    terms = rho[order] ** 2 + (channel.epsilon * nu[order] / lam[order]) ** 2
    prefix = np.cumsum(terms)
    ok = prefix <= gamma * (1.0 + 1e-12)
    return int(np.sum(ok)) if ok.any() else 0


@dataclass
class TotalInformation:
    exact_nats: float
    approx_nats: float

    @property
    def exact_bits(self) -> float:
        return self.exact_nats / math.log(2.0)

    @property
    def approx_bits(self) -> float:
        return self.approx_nats / math.log(2.0)


def total_information(channel: GaussianChannel) -> TotalInformation:
    """Information carried by the informative set, exact and leading-order.

    ``exact = sum_{k in I} (1/2) ln(1 + (lam rho / eps nu)^2)`` and
    ``approx = sum_{k in I} ln(lam rho / (eps nu))``; every approx term is
    non-negative on I and ``0 <= exact - approx <= k_I (1/2) ln 2``.
    Empty I gives (0, 0).
    """
    if channel.epsilon <= 0.0:
        raise ValidationError("total information requires epsilon > 0")
    part = partition_IN(channel)
    lam, rho, nu = channel.arrays()
    exact = 0.0
    approx = 0.0
    for k in part.I:
        ratio = lam[k - 1] * rho[k - 1] / (channel.epsilon * nu[k - 1])
        _, J = _info_from_ratio(ratio)
        exact += J
        approx += math.log(ratio)
    return TotalInformation(exact_nats=exact, approx_nats=approx)


# ---------------------------------------------------------------------------
# Extremal cases
# ---------------------------------------------------------------------------


@dataclass
class ExtremalComparison:
    """Side-by-side of channel information and its metric counterpart."""

    case: str
    epsilon: float
    k0: int
    k_I: int
    exact_nats: float
    approx_nats: float
    reference_nats: float
    trace_class: bool
    note: str

    def to_json(self) -> dict:
        return {
            "case": self.case,
            "epsilon": self.epsilon,
            "k0": self.k0,
            "k_I": self.k_I,
            "exact_nats": self.exact_nats,
            "approx_nats": self.approx_nats,
            "reference_nats": self.reference_nats,
            "trace_class": self.trace_class,
            "note": self.note,
        }


def extremal_comparison(model: SpectrumModel, epsilon: float, case: str,
                        k_max: int | None = None) -> ExtremalComparison:
    """The two extremal prior/noise matchings.

    ``case="alpha"`` (rho = nu = 1): the informative count coincides with the
    spectral cutoff and the leading-order information equals the metric
    lower bound converted to nats.

    ``case="beta"`` (rho_k = (1 + 1e-9/k) / lambda_k, nu = 1): the
    signal-to-noise ratio is flat, every component looks informative, so the
    sum is capped at ``k0(eps)`` components (in the rearranged order) and the
    leading-order information is ``k0 ln(1/eps)``.  The prior is not trace
    class, so risk and budget counts are disabled for this case.
    """
    eps = float(epsilon)
    if not (0.0 < eps) or not math.isfinite(eps):
        raise ValidationError("extremal comparison requires epsilon > 0")
    km = model.k_max if k_max is None else int(k_max)
    cut = k0(model, eps)
    # the comparison only ever sums the first k0 components, so the channel
    # need not extend past them (deep tails may underflow the spectrum)
    km = max(min(km, cut), 1)

    if case == "alpha":
        chan = GaussianChannel(model, constant_rule(1.0), constant_rule(1.0),
                               eps, k_max=km)
        part = partition_IN(chan)
        info = total_information(chan)
        reference = entropy_lower_bound(model, eps) * math.log(2.0)
        return ExtremalComparison(
            case="alpha", epsilon=eps, k0=cut, k_I=part.k_I,
            exact_nats=info.exact_nats, approx_nats=info.approx_nats,
            reference_nats=reference, trace_class=False,
            note="matched prior/noise: k_I equals the spectral cutoff and the "
                 "leading-order information equals the metric lower bound in nats")

    if case == "beta":
        if eps >= 1.0:
            raise ValidationError("case beta needs epsilon < 1")
        chan = GaussianChannel(model, inverse_spectrum_rule(model),
                               constant_rule(1.0), eps, k_max=km)
        cap = min(cut, chan.k_max)
        lam, rho, nu = chan.arrays()
        exact = 0.0
        approx = 0.0
        for j in range(cap):
            k_label = int(chan.ordering[j])
            ratio = lam[k_label - 1] * rho[k_label - 1] / (eps * nu[k_label - 1])
            _, J = _info_from_ratio(ratio)
            exact += J
            approx += math.log(ratio)
        reference = cut * math.log(1.0 / eps)
        return ExtremalComparison(
            case="beta", epsilon=eps, k0=cut, k_I=cap,
            exact_nats=exact, approx_nats=approx,
            reference_nats=reference, trace_class=False,
            note="flat signal-to-noise: every component is informative, sum "
                 "capped at k0 components; prior is not trace class, so "
                 "mse/k_alpha are disabled")

    raise ValidationError(f"case must be 'alpha' or 'beta', got {case!r}")
