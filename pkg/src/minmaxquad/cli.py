"""Command-line front end.

Subcommands: integrate, orness, idempotency, expect, cdf, verify, table.
Exit codes: 0 success, 2 usage/spec error, 3 non-convergence (best
estimate still printed), 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import aggregation as agg
from . import expr, oracle, probability, reduction
from .quadrature import DEFAULT_TOLERANCE, Interval, QuadResult, QuadratureError, Tolerance

EXIT_OK, EXIT_SPEC, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 2, 3, 4

# integrands known to `integrate` and `verify` by name
NAMED_KERNELS = ("variance-range", "geometric-orness", "range", "one")


class SpecError(ValueError):
    pass


@dataclass
class JobSpec:
    subcommand: str
    n: int | None = None
    domain: tuple = (0.0, 1.0)
    tol: Tolerance = DEFAULT_TOLERANCE
    kernel: str | None = None
    builtin: str | None = None
    choquet: str | None = None
    g: str | None = None
    dists: list = field(default_factory=list)
    dist_file: str | None = None
    z: float | None = None
    kind: str | None = None
    fmt: str = "text"
    seed: int = 0
    samples: int = 10**6

    def sources(self) -> list[str]:
        return [name for name, val in (("--kernel", self.kernel), ("--builtin", self.builtin),
                                       ("--choquet", self.choquet)) if val is not None]

    def validate(self, allowed: tuple[str, ...]) -> None:
        given = self.sources()
        if len(given) != 1:
            raise SpecError(f"give exactly one integrand source among {', '.join(allowed)}"
                            + (f" (got {', '.join(given)})" if given else ""))
        if given[0] not in allowed:
            raise SpecError(f"{self.subcommand} does not take {given[0]}")


# ---------------------------------------------------------------------------
# helpers


def _interval(spec: JobSpec) -> Interval:
    try:
        return Interval(*spec.domain)
    except (TypeError, ValueError) as exc:
        raise SpecError(f"bad --domain: {exc}") from None


def _need_n(spec: JobSpec, least: int = 2) -> int:
    if spec.n is None:
        raise SpecError("--n is required")
    if spec.n < least:
        raise SpecError(f"--n must be at least {least}")
    return spec.n


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _result_doc(res: QuadResult) -> dict:
    return {"value": res.value, "abs_error": res.abs_error,
            "evaluations": res.evaluations, "converged": res.converged}


def _cube_kernel(spec: JobSpec, n: int):
    """Return ``(reduce(domain, tol) -> QuadResult, oracle f(x, min, max))``."""
    if spec.builtin is not None:
        name = spec.builtin
        if name == "variance-range":
            return (lambda dom, tol: reduction.integrate_minmax_full(
                        reduction.variance_range_integrand(n), dom, tol),
                    lambda x, lo, hi: reduction.sample_variance(x) / (hi - lo))
        if name == "geometric-orness":
            F = agg.geometric_mean(n)

            def run(dom, tol):
                return agg.orness_average_numeric(F, dom, tol).scaled(dom.width ** n)

            return run, lambda x, lo, hi: (F.eval(x) - lo) / (hi - lo)
        if name == "range":
            return (lambda dom, tol: reduction.integrate_minmax_pair(lambda u, v: v - u, n, dom, tol),
                    lambda x, lo, hi: hi - lo)
        if name == "one":
            return (lambda dom, tol: reduction.integrate_minmax_pair(lambda u, v: np.ones_like(u), n, dom, tol),
                    lambda x, lo, hi: np.ones_like(lo))
        raise SpecError(f"unknown builtin kernel {name!r}; choose from {', '.join(NAMED_KERNELS)}")

    node = expr.parse(spec.kernel)
    names = expr.free_vars(node)
    extra = [f"x{i}" for i in range(1, n - 1)]
    unknown = names - {"u", "v", *extra}
    if unknown:
        raise SpecError(f"kernel may only use u, v{', x1..x' + str(n - 2) if n > 2 else ''}; "
                        f"found {', '.join(sorted(unknown))}")
    if names <= {"u", "v"}:
        g = expr.to_callable(node, ["u", "v"])
        return (lambda dom, tol: reduction.integrate_minmax_pair(g, n, dom, tol),
                lambda x, lo, hi: g(lo, hi))
    h = expr.to_callable(node, ["u", "v", *extra])

    def ev(free, u, v):
        return h(u, v, *free.T)

    def point(x, lo, hi):
        middle = np.sort(x, axis=1)[:, 1:-1]
        return h(lo, hi, *middle.T)

    return (lambda dom, tol: reduction.integrate_minmax_full(reduction.SymmetricFullIntegrand(ev, n), dom, tol),
            point)


def _load_set_function(path: str) -> agg.SetFunction:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    return agg.SetFunction.from_json(text)


def _distributions(spec: JobSpec) -> list:
    dists = [probability.parse_distribution(d) for d in spec.dists]
    if spec.dist_file is not None:
        try:
            text = Path(spec.dist_file).read_text()
        except OSError as exc:
            raise SpecError(f"cannot read {spec.dist_file}: {exc.strerror}") from None
        doc = json.loads(text)
        docs = doc if isinstance(doc, list) else [doc]
        dists.extend(probability.from_spec(d) for d in docs)
    if not dists:
        raise SpecError("give --dist kind:params or --dist-file")
    return dists


def _functional(spec: JobSpec):
    if spec.g is None:
        raise SpecError("--g is required")
    node = expr.parse(spec.g)
    return expr.to_callable(node, ["u", "v"])


# ---------------------------------------------------------------------------
# subcommands; each returns (doc, text lines, exit code)


def cmd_integrate(spec: JobSpec):
    spec.validate(("--kernel", "--builtin"))
    n = _need_n(spec)
    dom = _interval(spec)
    run, _ = _cube_kernel(spec, n)
    res = run(dom, spec.tol)
    doc = _result_doc(res)
    lines = [f"value        {res.value!r}", f"abs_error    {res.abs_error:.3g}",
             f"evaluations  {res.evaluations}", f"converged    {res.converged}"]
    return doc, lines, EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_orness(spec: JobSpec):
    spec.validate(("--builtin", "--choquet"))
    dom = _interval(spec)
    exact = None
    if spec.choquet is not None:
        a = _load_set_function(spec.choquet)
        if spec.n is not None and spec.n != a.n:
            raise SpecError(f"--n {spec.n} disagrees with the set function's n = {a.n}")
        F = agg.choquet(a)
        exact = agg.orness_average_choquet(a)
    else:
        n = _need_n(spec)
        if spec.builtin not in ("geometric", "arithmetic", "min", "max"):
            raise SpecError(f"orness needs an internal builtin (geometric, arithmetic, min, max), got {spec.builtin!r}")
        F = agg.BUILTINS[spec.builtin](n)
    avg = agg.orness_average_numeric(F, dom, spec.tol)
    glob = agg.global_orness(F, dom, spec.tol)
    converged = avg.converged and glob.converged
    doc = {"orness_average": avg.value, "andness_average": 1.0 - avg.value,
           "global_orness": glob.value, "abs_error": avg.abs_error,
           "orness_exact": None if exact is None else _fraction_text(exact),
           "converged": converged}
    lines = [f"orness average   {avg.value!r}", f"andness average  {1.0 - avg.value!r}",
             f"global orness    {glob.value!r}", f"abs_error        {avg.abs_error:.3g}"]
    if exact is not None:
        lines.append(f"closed form      {_fraction_text(exact)} = {float(exact)!r}")
    return doc, lines, EXIT_OK if converged else EXIT_CONVERGENCE


_KINDS = {"product": "conjunctive", "min": "conjunctive", "max": "disjunctive"}


def cmd_idempotency(spec: JobSpec):
    spec.validate(("--builtin",))
    n = _need_n(spec, 1)
    dom = _interval(spec)
    if spec.builtin not in _KINDS:
        raise SpecError(f"idempotency needs product, min or max, got {spec.builtin!r}")
    F = agg.BUILTINS[spec.builtin](n)
    kind = spec.kind or _KINDS[spec.builtin]
    avg = agg.idempotency_average_numeric(F, kind, dom, spec.tol)
    glob = agg.global_idempotency(F, kind, dom, spec.tol)
    exact_avg = exact_glob = None
    if spec.builtin == "product" and dom == Interval(0.0, 1.0):
        exact_avg = _fraction_text(agg.idempotency_average_product(n))
        exact_glob = _fraction_text(agg.global_idempotency_product(n))
    converged = avg.converged and glob.converged
    doc = {"idempotency_average": avg.value, "global_idempotency": glob.value,
           "abs_error": avg.abs_error, "average_exact": exact_avg, "global_exact": exact_glob,
           "converged": converged}
    lines = [f"idempotency average  {avg.value!r}", f"global idempotency   {glob.value!r}",
             f"abs_error            {avg.abs_error:.3g}"]
    if exact_avg is not None:
        lines.append(f"closed forms         {exact_avg}, {exact_glob}")
    return doc, lines, EXIT_OK if converged else EXIT_CONVERGENCE


def _expect_setup(spec: JobSpec):
    g = _functional(spec)
    dists = _distributions(spec)
    if len(dists) == 1:
        n = _need_n(spec)
    else:
        if spec.n is not None and spec.n != len(dists):
            raise SpecError(f"--n {spec.n} but {len(dists)} distributions given")
        n = len(dists)
    return g, dists, n


def cmd_expect(spec: JobSpec):
    g, dists, n = _expect_setup(spec)
    if len(dists) == 1:
        res = probability.expect_minmax_iid(g, dists[0], n, spec.tol)
    else:
        res = probability.expect_minmax_hetero(g, dists, spec.tol)
    lines = [f"value        {res.value!r}", f"abs_error    {res.abs_error:.3g}",
             f"evaluations  {res.evaluations}", f"converged    {res.converged}"]
    return _result_doc(res), lines, EXIT_OK if res.converged else EXIT_CONVERGENCE


def cmd_cdf(spec: JobSpec):
    g, dists, n = _expect_setup(spec)
    if len(dists) != 1:
        raise SpecError("cdf supports identically distributed variables only (one --dist)")
    if spec.z is None:
        raise SpecError("--z is required")
    res = probability.cdf_of_functional(g, dists[0], n, spec.z, spec.tol)
    lines = [f"value        {res.value!r}", f"abs_error    {res.abs_error:.3g}",
             f"evaluations  {res.evaluations}", f"converged    {res.converged}"]
    return _result_doc(res), lines, EXIT_OK if res.converged else EXIT_CONVERGENCE


def verify_passes(reduced: QuadResult, mc: oracle.McEstimate, tol: Tolerance, sigmas: float = 4.0) -> bool:
    """Gap within ``sigmas`` oracle standard errors, plus the quadrature tolerance."""
    gap = abs(reduced.value - mc.mean)
    return gap <= sigmas * mc.std_error + max(reduced.abs_error, tol.target(reduced.value))


def cmd_verify(spec: JobSpec):
    if spec.g is not None:
        if spec.sources():
            raise SpecError("give either --g with --dist (expectation) or one cube integrand source, not both")
        g, dists, n = _expect_setup(spec)
        t0 = time.perf_counter()
        if len(dists) == 1:
            res = probability.expect_minmax_iid(g, dists[0], n, spec.tol)
        else:
            res = probability.expect_minmax_hetero(g, dists, spec.tol)
        t_red = time.perf_counter() - t0
        t0 = time.perf_counter()
        mc = oracle.mc_expect(g, dists if len(dists) > 1 else dists * n, spec.samples, spec.seed)
        t_mc = time.perf_counter() - t0
        grid = None
        t_grid = None
    else:
        spec.validate(("--kernel", "--builtin"))
        n = _need_n(spec)
        dom = _interval(spec)
        run, point = _cube_kernel(spec, n)
        t0 = time.perf_counter()
        res = run(dom, spec.tol)
        t_red = time.perf_counter() - t0
        t0 = time.perf_counter()
        mc = oracle.mc_cube(point, n, dom, spec.samples, spec.seed)
        t_mc = time.perf_counter() - t0
        grid = t_grid = None
        if n <= 4:
            t0 = time.perf_counter()
            grid = oracle.tensor_cube(point, n, dom, 32 if n <= 3 else 16)
            t_grid = time.perf_counter() - t0
    ok = verify_passes(res, mc, spec.tol)
    gap = mc.sigmas(res.value)
    doc = {"reduced": res.value, "reduced_abs_error": res.abs_error, "reduced_seconds": t_red,
           "oracle": mc.mean, "oracle_std_error": mc.std_error, "oracle_samples": mc.samples,
           "oracle_seconds": t_mc, "tensor": grid, "tensor_seconds": t_grid,
           "gap_sigmas": None if math.isinf(gap) else gap, "passed": ok}
    lines = [f"reduced   {res.value!r}  (+/- {res.abs_error:.3g}, {t_red:.3f} s)",
             f"oracle    {mc.mean!r}  (se {mc.std_error:.3g}, {mc.samples} samples, {t_mc:.3f} s)"]
    if grid is not None:
        lines.append(f"tensor    {grid!r}  ({t_grid:.3f} s)")
    lines.append(f"gap       {gap:.3f} sigma -> {'PASS' if ok else 'FAIL'}")
    if not ok:
        return doc, lines, EXIT_VERIFY
    return doc, lines, EXIT_OK if res.converged else EXIT_CONVERGENCE


def _random_set_function(n: int, rng) -> agg.SetFunction:
    full = (1 << n) - 1
    cap = {m: 0.0 for m in range(full + 1)}
    # monotone capacity: sorted uniforms along a random chain, then max-closure
    vals = rng.random(full + 1)
    for m in sorted(range(1, full), key=lambda m: bin(m).count("1")):
        below = max((cap[m & ~(1 << i)] for i in range(n) if m >> i & 1), default=0.0)
        cap[m] = below + (1.0 - below) * vals[m] * 0.5
    cap[full] = 1.0
    return agg.SetFunction.from_capacity(n, cap)


def table_rows(seed: int = 0):
    """Yield ``(group, label, closed, numeric, seconds)`` for the catalog."""
    closed_geo = {
        2: math.log(4) - 1,
        3: math.sqrt(3) * math.pi / 2 - 47 / 20,
        4: 96 * math.log(2) / 25 - 8837 / 3850,
        5: 25 * math.pi / 27 * math.sqrt(2.5 * (25 - 11 * math.sqrt(5))) - 2454487 / 960336,
    }
    for n, ref in closed_geo.items():
        t0 = time.perf_counter()
        val = agg.orness_average_numeric(agg.geometric_mean(n)).value
        yield "geometric orness", f"n={n}", ref, val, time.perf_counter() - t0
    rng = np.random.default_rng(seed)
    for n in (2, 3, 4):
        a = _random_set_function(n, rng)
        t0 = time.perf_counter()
        val = agg.orness_average_numeric(agg.choquet(a)).value
        yield "choquet orness", f"n={n}", float(agg.orness_average_choquet(a)), val, time.perf_counter() - t0
        t0 = time.perf_counter()
        yield ("choquet global=average", f"n={n}", float(agg.orness_average_choquet(a)),
               float(agg.global_orness_choquet(a)), time.perf_counter() - t0)
    for n in range(1, 7):
        F = agg.product(n)
        t0 = time.perf_counter()
        val = agg.idempotency_average_numeric(F).value
        yield "product idempotency", f"n={n}", float(agg.idempotency_average_product(n)), val, time.perf_counter() - t0
        t0 = time.perf_counter()
        val = agg.global_idempotency(F).value
        yield "product global idemp.", f"n={n}", float(agg.global_idempotency_product(n)), val, time.perf_counter() - t0
    U = probability.uniform(0.0, 1.0)
    for n in (2, 3, 5):
        for r in (1, 2, 3):
            t0 = time.perf_counter()
            val = probability.expect_minmax_iid(lambda u, v, r=r: ((v - u) / v) ** r, U, n).value
            yield ("relative range moment", f"n={n} r={r}", float(probability.relative_range_moment(n, r)),
                   val, time.perf_counter() - t0)


def cmd_table(spec: JobSpec):
    rows = []
    for group, label, closed, numeric, secs in table_rows(spec.seed):
        rows.append({"quantity": group, "case": label, "closed": closed, "numeric": numeric,
                     "gap": abs(closed - numeric), "seconds": secs})
    worst = max(r["gap"] for r in rows)
    lines = [f"{'quantity':<24}{'case':<10}{'closed':>22}{'numeric':>22}{'gap':>10}{'s':>8}"]
    for r in rows:
        lines.append(f"{r['quantity']:<24}{r['case']:<10}{r['closed']:>22.15g}{r['numeric']:>22.15g}"
                     f"{r['gap']:>10.1e}{r['seconds']:>8.3f}")
    lines.append(f"max gap {worst:.2e}")
    return {"rows": rows, "max_gap": worst}, lines, EXIT_OK if worst <= 1e-6 else EXIT_VERIFY


COMMANDS = {
    "integrate": cmd_integrate,
    "orness": cmd_orness,
    "idempotency": cmd_idempotency,
    "expect": cmd_expect,
    "cdf": cmd_cdf,
    "verify": cmd_verify,
    "table": cmd_table,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minmaxquad",
                                     description="Integrals of functions of min and max, reduced to 1-D/2-D quadrature.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")
    common.add_argument("--rel", type=float, default=DEFAULT_TOLERANCE.rel, help="relative tolerance")
    common.add_argument("--abs", dest="abs_", type=float, default=DEFAULT_TOLERANCE.abs, help="absolute tolerance")
    common.add_argument("--max-evals", type=int, default=DEFAULT_TOLERANCE.max_evaluations)

    cube = argparse.ArgumentParser(add_help=False)
    cube.add_argument("--n", type=int)
    cube.add_argument("--domain", nargs=2, type=float, default=(0.0, 1.0), metavar=("A", "B"))

    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--kernel", help="expression in u (min), v (max) and optionally x1..x{n-2}")
    source.add_argument("--builtin", help="named function")
    source.add_argument("--choquet", metavar="FILE", help="set-function JSON file")

    stieltjes = argparse.ArgumentParser(add_help=False)
    stieltjes.add_argument("--g", help="functional of u = min and v = max")
    stieltjes.add_argument("--dist", action="append", default=[],
                           help="kind:params, e.g. uniform:0,1 or exp:2; repeat for non-identical variables")
    stieltjes.add_argument("--dist-file", help="distribution JSON (one object or a list)")

    sampling = argparse.ArgumentParser(add_help=False)
    sampling.add_argument("--samples", type=int, default=10**6)
    sampling.add_argument("--seed", type=int, default=0)

    sub.add_parser("integrate", parents=[common, cube, source],
                   help="integral over (a,b)^n of a kernel in min/max")
    sub.add_parser("orness", parents=[common, cube, source], help="orness and andness of an internal function")
    p = sub.add_parser("idempotency", parents=[common, cube, source],
                       help="idempotency measures of a conjunctive or disjunctive function")
    p.add_argument("--kind", choices=("conjunctive", "disjunctive"))
    sub.add_parser("expect", parents=[common, cube, stieltjes], help="E[g(min, max)] for independent variables")
    p = sub.add_parser("cdf", parents=[common, cube, stieltjes], help="P[g(min, max) <= z]")
    p.add_argument("--z", type=float, required=True)
    sub.add_parser("verify", parents=[common, cube, source, stieltjes, sampling],
                   help="reduced quadrature against the sampling oracle")
    p = sub.add_parser("table", parents=[common], help="catalog of closed forms against numeric values")
    p.add_argument("--seed", type=int, default=0)
    return parser


def spec_from_args(args) -> JobSpec:
    try:
        tol = Tolerance(rel=args.rel, abs=args.abs_, max_evaluations=args.max_evals)
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    return JobSpec(
        subcommand=args.subcommand,
        n=getattr(args, "n", None),
        domain=tuple(getattr(args, "domain", (0.0, 1.0))),
        tol=tol,
        kernel=getattr(args, "kernel", None),
        builtin=getattr(args, "builtin", None),
        choquet=getattr(args, "choquet", None),
        g=getattr(args, "g", None),
        dists=list(getattr(args, "dist", []) or []),
        dist_file=getattr(args, "dist_file", None),
        z=getattr(args, "z", None),
        kind=getattr(args, "kind", None),
        fmt=args.fmt,
        seed=getattr(args, "seed", 0),
        samples=getattr(args, "samples", 10**6),
    )


SPEC_ERRORS = (SpecError, expr.ExprError, agg.AggregationError, probability.ProbabilityError,
               reduction.ReductionError, json.JSONDecodeError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    caught = []
    try:
        spec = spec_from_args(args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            doc, lines, code = COMMANDS[spec.subcommand](spec)
    except SPEC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except QuadratureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if spec.fmt == "json":
        print(json.dumps(doc))
    else:
        print("\n".join(lines))
    return code


if __name__ == "__main__":
    sys.exit(main())
