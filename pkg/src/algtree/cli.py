"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid input or failed
verification, 3 a check suite reported failures.
"""
from __future__ import annotations

import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from .core_tree import TreeError, verify_axioms
from .measure import (
    MeasureError,
    MeasureTree,
    branch_point_distribution,
    branch_point_distribution_bruteforce,
    equivalent,
    measure_canonical_form,
    measure_tree_from_dict,
    measure_tree_to_dict,
)
from .random_trees import (
    RandomTreeError,
    beta_splitting_tree,
    comb_tree,
    parse_beta,
    random_atomic_tree,
    random_t2_tree,
    random_tree,
    symmetric_binary,
)
from .shapes import ShapeDistribution, ShapeError, shape_distribution, tv_distance
from .stats import (
    FAMILIES,
    Lipschitz,
    StatsError,
    distance_polynomial,
    glivenko_cantelli_sup,
    massdist,
    vc_shatter_check,
    wasserstein_linf,
)
from .triangulation import (
    TriangulationError,
    code,
    decode,
    render_svg,
    triangulation_from_dict,
    triangulation_to_dict,
    uniform_triangulation,
    validate,
)

INPUT_ERRORS = (
    TreeError,
    MeasureError,
    ShapeError,
    StatsError,
    RandomTreeError,
    TriangulationError,
    json.JSONDecodeError,
)


class ValidationFailure(click.ClickException):
    exit_code = 2


class CheckFailure(click.ClickException):
    exit_code = 3


def _off_diagonal(matrix) -> list:
    m = len(matrix)
    return [matrix[i][j] for i in range(m) for j in range(i + 1, m)]


PHIS: dict[str, Lipschitz] = {
    "mean": Lipschitz(lambda d: sum(_off_diagonal(d)) / max(1, len(_off_diagonal(d))), 1.0),
    "max": Lipschitz(lambda d: max(_off_diagonal(d), default=0), 1.0),
    "min": Lipschitz(lambda d: min(_off_diagonal(d), default=0), 1.0),
}


# ----------------------------------------------------------------------
# file helpers


def _config(ctx: click.Context) -> dict:
    params = {k: v for k, v in ctx.params.items() if v is not None and not isinstance(v, io.IOBase)}
    return {"command": ctx.info_name, "version": __version__, **{k: _plain(v) for k, v in params.items()}}


def _plain(v):
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, (int, float, str, bool)):
        return v
    return str(v)


def _read_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise TreeError(f"{path}: expected a JSON object")
    return data


def _load_tree(path: str) -> MeasureTree:
    return measure_tree_from_dict(_read_json(path))


def _write_json(data: dict, out: str | None, ctx: click.Context) -> None:
    payload = {"config": _config(ctx), **data}
    text = json.dumps(payload, indent=2) + "\n"
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _write_csv(header: list[str], rows: list, out: str | None, ctx: click.Context) -> None:
    buf = io.StringIO()
    for k, v in _config(ctx).items():
        buf.write(f"# {k}={v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if out is None or out == "-":
        click.echo(buf.getvalue(), nl=False)
    else:
        Path(out).write_text(buf.getvalue(), encoding="utf-8")


def _need_seed(seed: int | None, what: str) -> int:
    if seed is None:
        raise click.UsageError(f"{what} is random: --seed is required")
    return seed


def _fmt(x) -> str:
    return str(x) if isinstance(x, Fraction) else repr(float(x))


# ----------------------------------------------------------------------


@click.group()
@click.version_option(__version__, prog_name="algtree")
def cli() -> None:
    """Finite algebraic measure trees, their statistics and circle codings."""


@cli.command()
@click.option("--model", type=click.Choice(["beta", "comb", "symmetric", "polygon", "t2"]), required=True)
@click.option("--n", "n", type=int, help="number of leaves (polygon: corners)")
@click.option("--k", "k", type=int, help="depth of the symmetric binary tree")
@click.option("--beta", default="0", show_default=True, help='split parameter, a float, "-2" or "inf"')
@click.option("--seed", type=int)
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
def gen(ctx, model, n, k, beta, seed, out):
    """Generate a measure tree, or a triangulation for --model polygon."""
    if model in ("beta", "comb", "polygon", "t2") and n is None:
        raise click.UsageError(f"--model {model} needs --n")
    if model == "symmetric" and k is None:
        raise click.UsageError("--model symmetric needs --k")
    if model == "polygon":
        C = uniform_triangulation(n, _need_seed(seed, "polygon"))
        _write_json(triangulation_to_dict(C), out, ctx)
        return
    if model == "beta":
        mt = beta_splitting_tree(n, parse_beta(beta), _need_seed(seed, "beta"))
    elif model == "t2":
        mt = random_t2_tree(n, np.random.default_rng(_need_seed(seed, "t2")))
    elif model == "comb":
        mt = comb_tree(n)
    else:
        mt = symmetric_binary(k)
    _write_json(measure_tree_to_dict(mt), out, ctx)
    if out not in (None, "-"):
        click.echo(measure_canonical_form(mt).digest())


@cli.command("code")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.option("--verify", is_flag=True, help="check that decoding the result gives the same tree back")
@click.pass_context
def code_cmd(ctx, source, out, verify):
    """Code a triangulation JSON into a measure-tree JSON."""
    C = triangulation_from_dict(_read_json(source))
    report = validate(C)
    if not report.ok:
        raise ValidationFailure("invalid triangulation: " + "; ".join(report.violations))
    mt = code(C)
    if verify and not equivalent(code(decode(mt)), mt):
        raise ValidationFailure("round trip changed the tree")
    _write_json(measure_tree_to_dict(mt), out, ctx)


@cli.command("decode")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--rho", type=int, help="leaf to start from (internal index)")
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.option("--verify", is_flag=True, help="check that coding the result gives the same tree back")
@click.pass_context
def decode_cmd(ctx, source, rho, out, verify):
    """Decode a measure-tree JSON into a triangulation JSON."""
    mt = _load_tree(source)
    C = decode(mt, rho=rho)
    if verify and not equivalent(code(C), mt):
        raise ValidationFailure("round trip changed the tree")
    _write_json(triangulation_to_dict(C), out, ctx)


def _statistic(mt, stat, m, N, seed, threads, convention, phi, n_branch):
    """Distribution (shape, mass) or scalar (distance) for one tree."""
    if N is not None:
        _need_seed(seed, "sampling")
    if stat == "shape":
        if N is None:
            return shape_distribution(mt, m, "exact")
        return shape_distribution(mt, m, "sampled", N=N, seed=seed, threads=threads)
    if stat == "mass":
        if N is None:
            return massdist(mt, m, "exact", convention=convention)
        return massdist(mt, m, "sampled", N=N, seed=seed, convention=convention, threads=threads)
    if N is None:
        return distance_polynomial(mt, m, PHIS[phi], "exact")
    if n_branch is None:
        raise click.UsageError("the empirical distance polynomial needs --n-branch")
    return distance_polynomial(mt, m, PHIS[phi], "empirical", n=n_branch, N=N, seed=seed)


_stat_options = [
    click.option("--stat", type=click.Choice(["shape", "mass", "distance"]), default="shape", show_default=True),
    click.option("--m", "m", type=int, required=True, help="number of samples"),
    click.option("--N", "N", type=int, help="Monte Carlo size; exact enumeration when omitted"),
    click.option("--seed", type=int),
    click.option("--threads", type=int, default=1, show_default=True),
    click.option("--convention", type=click.Choice(["open", "closed"]), default="open", show_default=True),
    click.option("--phi", type=click.Choice(sorted(PHIS)), default="mean", show_default=True),
    click.option("--n-branch", type=int, help="branch-point sample size for the empirical metric"),
]


def _with_stat_options(fn: Callable) -> Callable:
    for opt in reversed(_stat_options):
        fn = opt(fn)
    return fn


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@_with_stat_options
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
def sample(ctx, source, stat, m, N, seed, threads, convention, phi, n_branch, out):
    """Shape, mass-tensor or distance-polynomial statistics of one tree."""
    mt = _load_tree(source)
    result = _statistic(mt, stat, m, N, seed, threads, convention, phi, n_branch)
    if stat == "shape":
        rows = [(k, _fmt(p)) for k, p in sorted(result.probabilities.items())]
        _write_csv(["key", "probability"], rows, out, ctx)
    elif stat == "mass":
        rows = []
        for key, p in sorted(result.probabilities().items(), key=lambda kv: repr(kv[0])):
            tensor = "|".join(";".join(str(x) for x in triple) for triple in key)
            rows.append((tensor, _fmt(p)))
        _write_csv(["tensor", "probability"], rows, out, ctx)
    else:
        _write_csv(["statistic", "value"], [(f"phi_{phi}", _fmt(result))], out, ctx)


@cli.command()
@click.argument("first", type=click.Path(exists=True, dir_okay=False))
@click.argument("second", type=click.Path(exists=True, dir_okay=False))
@_with_stat_options
@click.option("--metric", type=click.Choice(["tv", "wasserstein"]), default="tv", show_default=True)
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.pass_context
def compare(ctx, first, second, stat, m, N, seed, threads, convention, phi, n_branch, metric, out):
    """Distance between the statistics of two trees."""
    trees = [_load_tree(first), _load_tree(second)]
    results = [_statistic(t, stat, m, N, seed, threads, convention, phi, n_branch) for t in trees]
    if stat == "shape":
        value = tv_distance(*results)
        name = "tv"
    elif stat == "mass":
        if metric == "wasserstein":
            value, name = wasserstein_linf(*results), "wasserstein_linf"
        else:
            p, q = (r.probabilities() for r in results)
            value = sum(abs(p.get(k, 0) - q.get(k, 0)) for k in set(p) | set(q)) / 2
            name = "tv"
    else:
        value, name = abs(results[0] - results[1]), f"abs_diff_phi_{phi}"
    _write_csv(["statistic", "value"], [(name, _fmt(value))], out, ctx)


SUITES = ("axioms", "oracle", "vc", "coding", "gc")


@cli.command()
@click.option("--suite", "suites", type=click.Choice(SUITES + ("all",)), multiple=True, default=("all",))
@click.option("--trees", type=int, default=50, show_default=True, help="random trees per suite")
@click.option("--max-n", type=int, default=12, show_default=True)
@click.option("--gc-n", "gc_ns", type=int, multiple=True, default=(100, 1000, 10000), show_default=True)
@click.option("--trials", type=int, default=1000, show_default=True)
@click.option("--seed", type=int)
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True), help="CSV of GC trials")
@click.pass_context
def check(ctx, suites, trees, max_n, gc_ns, trials, seed, out):
    """Run randomized self-checks; exits 3 if any fails."""
    rng = np.random.default_rng(_need_seed(seed, "check"))
    chosen = SUITES if "all" in suites else tuple(dict.fromkeys(suites))
    failures = []

    def report(name: str, ok: bool, detail: str) -> None:
        click.echo(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failures.append(name)

    if "axioms" in chosen:
        bad = 0
        for _ in range(trees):
            t = random_tree(int(rng.integers(1, max_n + 1)), rng)
            bad += not verify_axioms(t).ok
        report("axioms", bad == 0, f"{trees} trees, {bad} with violations")
    if "oracle" in chosen:
        bad = 0
        for _ in range(trees):
            mt = random_atomic_tree(int(rng.integers(1, max_n + 1)), rng)
            bad += branch_point_distribution(mt) != branch_point_distribution_bruteforce(mt)
        report("oracle", bad == 0, f"{trees} trees, {bad} mismatches")
    if "vc" in chosen:
        bad = 0
        for _ in range(trees):
            t = random_tree(int(rng.integers(1, max_n + 1)), rng)
            bad += vc_shatter_check(t, "intervals", 3)[0] or vc_shatter_check(t, "subtree_components", 4)[0]
        report("vc", bad == 0, f"{trees} trees, {bad} shattered sets")
    if "coding" in chosen:
        bad = 0
        for _ in range(trees):
            mt = random_t2_tree(int(rng.integers(1, 4 * max_n + 1)), rng)
            bad += not equivalent(code(decode(mt)), mt)
        report("coding", bad == 0, f"{trees} trees, {bad} round-trip mismatches")
    if "gc" in chosen:
        mt = random_atomic_tree(max_n, rng)
        rows = []
        for family in sorted(FAMILIES):
            for n in gc_ns:
                gc = glivenko_cantelli_sup(mt, family, n, trials, int(rng.integers(2**32)))
                rows.extend((family, *row) for row in gc.rows())
                report(f"gc[{family},n={n}]", gc.violations == 0, f"mean sup {gc.mean:.4f}, bound {gc.bound:.4f}")
        if out:
            _write_csv(["family", "trial", "n", "sup_dev", "bound"], rows, out, ctx)
    if failures:
        raise CheckFailure(f"{len(failures)} check(s) failed: {', '.join(failures)}")


@cli.command()
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", type=click.Path(dir_okay=False, writable=True))
@click.option("--dual", is_flag=True, help="overlay the dual tree")
@click.option("--size", type=int, default=400, show_default=True)
def render(source, out, dual, size):
    """Draw a triangulation JSON as SVG."""
    C = triangulation_from_dict(_read_json(source))
    report = validate(C)
    if not report.ok:
        raise ValidationFailure("invalid triangulation: " + "; ".join(report.violations))
    svg = render_svg(C, size=size, dual=dual)
    if out is None or out == "-":
        click.echo(svg, nl=False)
    else:
        Path(out).write_text(svg, encoding="utf-8")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, prog_name="algtree", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except INPUT_ERRORS as exc:
        click.echo(f"Error: {exc}", err=True)
        return 2
    except OSError as exc:
        click.echo(f"Error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
