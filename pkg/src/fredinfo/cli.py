"""Command line front end.

Subcommands::

    eigens       print a spectrum prefix
    truncate     cutoff index / spectral-cutoff estimate from data
    capacity     entropy/capacity sandwich at a noise level
    metric-info  growth-order fits over a noise grid (or a packing count)
    prob-info    Gaussian-channel information summary
    simulate     run a sweep config, write CSV + metadata sidecar
    table        growth-order summary of the three reference spectra

Noise levels accept plain decimals (``--epsilon 1e-3``) or exact binary
exponents (``--epsilon pow2:-64`` meaning ``2**-64``); the exponent form
stays finite far below float range for the log-domain commands.  Exit codes:
0 success, 2 invalid input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .channel import (GaussianChannel, component_information,
                      constant_rule, extremal_comparison, gaussian_rule,
                      geometric_rule, inverse_spectrum_rule, k_alpha,
                      mse_closed_form, partition_IN, power_rule,
                      total_information)
from .errors import NumericError, ValidationError
from .harness import (ExperimentConfig, convergence_sweep,
                      reproduce_summary_table, summary_table_csv)
from .metric import capacity_interval, greedy_packing_count, growth_orders
from .spectra import (CoefficientVector, SpectrumModel, export_spectrum_csv,
                      green_model, heat_model, model_from_json, poisson_model,
                      tabulated_model)
from .truncation import k0, k0_closed_form, truncated_solution

__all__ = ["main", "build_parser"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


# ---------------------------------------------------------------------------
# Argument coercion
# ---------------------------------------------------------------------------


def parse_epsilon(text: str) -> tuple[float | None, float | None]:
    """Return ``(epsilon, log2_inv_eps)`` with exactly one set.

    ``pow2:-N`` means ``2**-N`` and is carried as the exponent ``N`` so the
    log-domain paths never form the (possibly underflowing) float.
    """
    text = text.strip()
    if text.startswith("pow2:"):
        try:
            exp = float(text[5:])
        except ValueError:
            raise ValidationError(f"bad pow2 exponent in {text!r}")
        return None, -exp
    try:
        eps = float(text)
    except ValueError:
        raise ValidationError(
            f"bad epsilon {text!r}: use a decimal or pow2:<exponent>")
    return eps, None


def parse_model(spec: str | None, json_path: str | None) -> SpectrumModel:
    if (spec is None) == (json_path is None):
        raise ValidationError("give exactly one of --model or --model-json")
    if json_path is not None:
        with open(json_path) as fh:
            return model_from_json(json.load(fh))
    kind, _, rest = spec.partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, sep, val = item.partition("=")
            if not sep:
                raise ValidationError(f"bad model parameter {item!r} (use key=value)")
            try:
                params[key.strip()] = float(val)
            except ValueError:
                raise ValidationError(f"bad numeric value in {item!r}")
    try:
        if kind == "poisson":
            return poisson_model(params.pop("a"), params.pop("b"),
                                 **{k: int(v) for k, v in params.items()})
        if kind == "heat":
            return heat_model(params.pop("D"), params.pop("a"), params.pop("b"),
                              **{k: int(v) for k, v in params.items()})
        if kind == "green":
            return green_model(**{k: int(v) for k, v in params.items()})
    except KeyError as exc:
        raise ValidationError(f"model {kind!r} is missing parameter {exc.args[0]!r}")
    except TypeError as exc:
        raise ValidationError(f"bad parameters for model {kind!r}: {exc}")
    raise ValidationError(
        f"unknown model kind {kind!r}: expected poisson, heat or green "
        "(use --model-json for tabulated spectra)")


_RULE_ARITY = {"constant": ("c",), "geometric": ("c", "q"), "power": ("c", "p"),
               "gaussian": ("c", "s")}


def parse_rule(spec: str, model: SpectrumModel):
    """Variance-rule syntax ``kind:v1[,v2]`` (e.g. ``geometric:1,0.5``)."""
    kind, _, rest = spec.partition(":")
    if kind == "inverse_spectrum":
        if rest:
            try:
                return inverse_spectrum_rule(model, float(rest))
            except ValueError:
                raise ValidationError(f"bad delta0 in {spec!r}")
        return inverse_spectrum_rule(model)
    if kind not in _RULE_ARITY:
        raise ValidationError(
            f"unknown variance rule {kind!r}: expected one of "
            f"{sorted(_RULE_ARITY)} or inverse_spectrum")
    names = _RULE_ARITY[kind]
    parts = rest.split(",") if rest else []
    if len(parts) != len(names):
        raise ValidationError(
            f"rule {kind!r} takes {len(names)} parameter(s) "
            f"{names}, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ValidationError(f"bad numeric value in rule {spec!r}")
    factory = {"constant": constant_rule, "geometric": geometric_rule,
               "power": power_rule, "gaussian": gaussian_rule}[kind]
    return factory(*vals)


def _load_vector(path: str, model: SpectrumModel) -> CoefficientVector:
    with open(path) as fh:
        obj = json.load(fh)
    vec = CoefficientVector.from_json(obj)
    if vec.model != model:
        raise ValidationError(f"vector in {path} was written for a different model")
    return vec


def _emit(text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    sys.stdout.write(text)


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_eigens(args) -> int:
    model = parse_model(args.model, args.model_json)
    if args.format == "csv":
        _emit(export_spectrum_csv(model, args.k_hi))
        return 0
    import numpy as np
    ks = np.arange(1, args.k_hi + 1)
    lams = model.eigenvalues(ks)
    rows = [{"k": int(k), "lambda": float(lam), "multiplicity": model.multiplicity(int(k))}
            for k, lam in zip(ks, lams)]
    _emit_json({"model": model.to_json(), "rows": rows})
    return 0


def _cmd_truncate(args) -> int:
    model = parse_model(args.model, args.model_json)
    eps, log2_inv = parse_epsilon(args.epsilon)
    if args.data is None:
        cut = k0(model, eps, log2_inv_eps=log2_inv)
        try:
            closed = k0_closed_form(model, eps, log2_inv_eps=log2_inv)
        except ValidationError:
            closed = None  # tabulated spectra have no closed form
        if args.format == "csv":
            _emit("epsilon,k0,k0_closed_form\n"
                  f"{args.epsilon},{cut},{_fmt(closed)}\n")
        else:
            _emit_json({"epsilon": args.epsilon, "k0": cut,
                        "k0_closed_form": closed})
        return 0
    if eps is None:
        eps = 2.0 ** (-log2_inv)
        if not eps > 0.0:
            raise ValidationError(
                "this exponent is below float range; truncating data needs a "
                "representable epsilon")
    data = _load_vector(args.data, model)
    reference = _load_vector(args.reference, model) if args.reference else None
    report = truncated_solution(model, data, eps, reference)
    if args.format == "csv":
        lines = ["k,real,imag"]
        for k, z in zip(report.f_star.indices, report.f_star.entries):
            z = complex(z)
            lines.append(f"{k},{z.real:.17g},{z.imag:.17g}")
        _emit("\n".join(lines) + "\n")
    else:
        _emit_json(report.to_json())
    return 0


def _cmd_capacity(args) -> int:
    from .metric import max_message_length_log2
    model = parse_model(args.model, args.model_json)
    eps, log2_inv = parse_epsilon(args.epsilon)
    bounds = capacity_interval(model, eps, log2_inv_eps=log2_inv, sided=args.sided)
    logl = max_message_length_log2(model, eps, log2_inv_eps=log2_inv, sided=args.sided)
    if args.format == "csv":
        _emit("epsilon,k0,k0_quarter,lower_bits,upper_bits,logL_max\n"
              f"{args.epsilon},{bounds.k0_eps},{bounds.k0_eps_over_4},"
              f"{_fmt(bounds.lower_bits)},{_fmt(bounds.upper_bits)},{_fmt(logl)}\n")
    else:
        obj = bounds.to_json()
        obj["logL_max"] = logl
        _emit_json(obj)
    return 0


def _cmd_metric_info(args) -> int:
    if args.packing_axes is not None:
        if args.epsilon is None or args.step is None:
            raise ValidationError("--packing-axes needs --epsilon and --step")
        axes = [float(a) for a in args.packing_axes.split(",")]
        eps, log2_inv = parse_epsilon(args.epsilon)
        if eps is None:
            raise ValidationError("packing counts need a representable epsilon")
        count = greedy_packing_count(axes, eps, float(args.step))
        if args.format == "csv":
            _emit("epsilon,grid_step,count\n"
                  f"{eps:.17g},{float(args.step):.17g},{count}\n")
        else:
            _emit_json({"semi_axes": axes, "epsilon": eps,
                        "grid_step": float(args.step), "count": count})
        return 0
    model = parse_model(args.model, args.model_json)
    if args.grid_eps is not None:
        grid = [float(v) for v in args.grid_eps.split(",")]
        est = growth_orders(model, grid)
    elif args.grid_log2 is not None:
        grid = [float(v) for v in args.grid_log2.split(",")]
        est = growth_orders(model, log2_inv_eps=grid)
    else:
        raise ValidationError("give one of --grid-eps, --grid-log2 or --packing-axes")
    if args.format == "csv":
        _emit("lambda_hat,mu_hat,rho_hat,sigma_hat,d_c,d_c_exp\n"
              f"{est.lambda_hat:.17g},{est.mu_hat:.17g},{est.rho_hat:.17g},"
              f"{est.sigma_hat:.17g},{_fmt(est.d_c)},{_fmt(est.d_c_exp)}\n")
    else:
        _emit_json(est.to_json())
    return 0


def _cmd_prob_info(args) -> int:
    model = parse_model(args.model, args.model_json)
    eps, log2_inv = parse_epsilon(args.epsilon)
    if eps is None:
        eps = 2.0 ** (-log2_inv)
    if not eps > 0.0:
        raise ValidationError("channel information needs a representable epsilon > 0")

    if args.extremal is not None:
        cmp = extremal_comparison(model, eps, args.extremal, k_max=args.k_max)
        if args.format == "csv":
            _emit("case,epsilon,k0,k_I,exact_nats,approx_nats,reference_nats\n"
                  f"{cmp.case},{cmp.epsilon:.17g},{cmp.k0},{cmp.k_I},"
                  f"{cmp.exact_nats:.17g},{cmp.approx_nats:.17g},"
                  f"{cmp.reference_nats:.17g}\n")
        else:
            _emit_json(cmp.to_json())
        return 0

    if args.rho is None or args.nu is None:
        raise ValidationError("prob-info needs --rho and --nu (or --extremal)")
    rho = parse_rule(args.rho, model)
    nu = parse_rule(args.nu, model)
    chan = GaussianChannel(model, rho, nu, eps, k_max=args.k_max)
    part = partition_IN(chan)
    info = total_information(chan)
    trace = rho.is_trace_class
    summary = {
        "epsilon": eps,
        "k_max": chan.k_max,
        "k_I": part.k_I,
        "k_alpha": k_alpha(chan) if trace else None,
        "mse": mse_closed_form(chan) if trace else None,
        "exact_nats": info.exact_nats,
        "approx_nats": info.approx_nats,
    }
    if args.format == "csv":
        _emit("epsilon,k_I,k_alpha,mse,exact_nats,approx_nats\n"
              f"{eps:.17g},{part.k_I},{_fmt(summary['k_alpha'])},"
              f"{_fmt(summary['mse'])},{info.exact_nats:.17g},"
              f"{info.approx_nats:.17g}\n")
    else:
        summary["components"] = [component_information(chan, int(k)).to_json()
                                 for k in range(1, chan.k_max + 1)]
        _emit_json(summary)
    return 0


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        config = ExperimentConfig.from_json(json.load(fh))
    env_seed = os.environ.get("FREDINFO_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ValidationError(f"FREDINFO_SEED must be an integer, got {env_seed!r}")
        config = ExperimentConfig.from_json({**config.to_json(), "seed": seed})
    result = convergence_sweep(config)
    if args.out is not None:
        csv_path, meta_path = result.write(args.out)
        sys.stdout.write(f"wrote {csv_path}\nwrote {meta_path}\n")
    else:
        sys.stdout.write(result.to_csv())
    for v in result.violations:
        sys.stderr.write(f"monotonicity violation: {v}\n")
    return 0


def _cmd_table(args) -> int:
    rows = reproduce_summary_table()
    if args.format == "csv":
        _emit(summary_table_csv(rows))
    else:
        _emit_json([vars(r) for r in rows])
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="poisson:a=A,b=B | heat:D=D,a=A,b=B | green")
    p.add_argument("--model-json", help="path to a model JSON file (any kind)")


def _add_format_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="output format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fredinfo",
        description="Spectral-cutoff regularization and information budgets "
                    "for compact self-adjoint operator equations.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eigens", help="print a spectrum prefix")
    _add_model_args(p)
    p.add_argument("--k-hi", type=int, required=True, help="largest index to print")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_eigens)

    p = sub.add_parser("truncate", help="cutoff index / cutoff estimate from data")
    _add_model_args(p)
    p.add_argument("--epsilon", required=True, help="decimal or pow2:<exponent>")
    p.add_argument("--data", help="JSON file with observed coefficients")
    p.add_argument("--reference", help="JSON file with the true coefficients")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_truncate)

    p = sub.add_parser("capacity", help="entropy/capacity sandwich at a noise level")
    _add_model_args(p)
    p.add_argument("--epsilon", required=True, help="decimal or pow2:<exponent>")
    p.add_argument("--sided", choices=("one_sided", "total"), default="one_sided")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_capacity)

    p = sub.add_parser("metric-info",
                       help="growth-order fits over a noise grid, or a packing count")
    _add_model_args(p)
    p.add_argument("--grid-eps", help="comma-separated decreasing epsilons")
    p.add_argument("--grid-log2", help="comma-separated increasing log2(1/eps)")
    p.add_argument("--packing-axes", help="comma-separated ellipsoid semi-axes")
    p.add_argument("--epsilon", help="separation (packing mode)")
    p.add_argument("--step", type=float, help="grid step (packing mode)")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_metric_info)

    p = sub.add_parser("prob-info", help="Gaussian-channel information summary")
    _add_model_args(p)
    p.add_argument("--epsilon", required=True, help="decimal or pow2:<exponent>")
    p.add_argument("--rho", help="prior rule, e.g. geometric:1,0.5")
    p.add_argument("--nu", help="noise-shape rule, e.g. constant:1")
    p.add_argument("--k-max", type=int, help="number of channel components")
    p.add_argument("--extremal", choices=("alpha", "beta"),
                   help="use a built-in extremal prior instead of --rho/--nu")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_prob_info)

    p = sub.add_parser("simulate", help="run a sweep config, write CSV + metadata")
    p.add_argument("--config", required=True, help="experiment config JSON file")
    p.add_argument("--out", help="output base path (writes .csv and .meta.json)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("table", help="growth-order summary of the reference spectra")
    _add_format_arg(p)
    p.set_defaults(func=_cmd_table)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (NumericError, AssertionError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
