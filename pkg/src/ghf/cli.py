"""Batch experiment runner: ``ghf run config.json`` and single-task shortcuts.

Exit codes: 0 when every task with ``"assert"`` passed, 1 on the first
assertion failure (named on stderr and in the report), 2 on config errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import basicfn as bf
from . import embed as em
from . import holo
from . import netlang as nl
from . import scalars as sc
from . import sets as st

log = logging.getLogger("ghf")

THREADS_ENV = "GHF_THREADS"
BUILTIN_CONFIGS = {"delta-tour": "delta_tour.json"}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config resolution


@dataclass
class Context:
    gauge: sc.Gauge
    order: int
    seed: int
    objects: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)

    def number(self, ref) -> sc.GenNumber:
        obj = self.resolve(ref)
        if isinstance(obj, sc.GenNumber):
            return obj
        raise ConfigError(f"{ref!r} is not a generalized number")

    def resolve(self, ref):
        if isinstance(ref, str) and ref.startswith("$"):
            key = ref[1:]
            if key not in self.results:
                raise ConfigError(f"reference to unknown or later task {ref!r}")
            return self.results[key]
        if isinstance(ref, str) and ref in self.objects:
            return self.objects[ref]
        if isinstance(ref, (int, float)):
            return sc.GenNumber.of(Fraction(ref), self.gauge)
        if isinstance(ref, list) and len(ref) == 2:
            return sc.GenNumber.of(complex(ref[0], ref[1]), self.gauge)
        if isinstance(ref, str):
            try:
                return sc.GenNumber.parse(ref, self.gauge)
            except nl.NetlangError as exc:
                raise ConfigError(f"cannot read {ref!r}: {exc}") from exc
        raise ConfigError(f"cannot resolve {ref!r}")

    def function(self, ref, params=("z",)) -> bf.FunctionNet:
        obj = self.objects.get(ref) if isinstance(ref, str) else None
        if isinstance(obj, bf.FunctionNet):
            return obj
        try:
            return bf.FunctionNet(ref, self.gauge, tuple(params))
        except nl.NetlangError as exc:
            raise ConfigError(f"cannot read function {ref!r}: {exc}") from exc

    def distribution(self, ref) -> em.CompactDistribution:
        if isinstance(ref, dict):
            return em.CompactDistribution.from_json(ref)
        if ref == "delta":
            return em.CompactDistribution.delta()
        obj = self.objects.get(ref)
        if isinstance(obj, em.CompactDistribution):
            return obj
        raise ConfigError(f"{ref!r} is not a distribution")

    def mollifier(self, ref) -> em.Mollifier:
        if ref is None:
            return em.mollifier()
        obj = self.objects.get(ref)
        if isinstance(obj, em.Mollifier):
            return obj
        try:
            return em.mollifier(ref)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc


def make_gauge(spec, grid: str | None) -> sc.Gauge:
    g = sc.EpsGrid.parse(grid) if grid else sc.EpsGrid()
    try:
        if isinstance(spec, dict):
            return sc.Gauge(spec["rho"], g, spec.get("name"))
        return sc.Gauge.named(spec or "eps", g)
    except (sc.GaugeError, nl.NetlangError, KeyError) as exc:
        raise ConfigError(f"bad gauge declaration {spec!r}: {exc}") from exc


def build_objects(ctx: Context, decl: dict) -> None:
    for name, spec in decl.items():
        try:
            if "number" in spec:
                ctx.objects[name] = sc.GenNumber.parse(spec["number"], ctx.gauge)
            elif "set" in spec:
                region = st.region_from_json(spec["set"])
                ctx.objects[name] = st.InternalSet(region, strong=spec.get("strong", True))
            elif "function" in spec:
                ctx.objects[name] = bf.FunctionNet(spec["function"], ctx.gauge, tuple(spec.get("params", ["z"])),
                                                   name=name)
            elif "distribution" in spec:
                ctx.objects[name] = em.CompactDistribution.from_json({"name": name, **spec["distribution"]})
            elif "mollifier" in spec:
                m = spec["mollifier"]
                if isinstance(m, str):
                    ctx.objects[name] = em.mollifier(m)
                else:
                    base = em.mollifier(m.get("base", "gauss-entire"))
                    from dataclasses import replace

                    body = nl.parse(m["expr"], ("z",)) if "expr" in m else base.body
                    mol = replace(base, name=m.get("name", name), body=body)
                    if "taylor" in m:
                        mol = mol.with_taylor(**{f"n{k}": v for k, v in m["taylor"].items()})
                    ctx.objects[name] = mol
            else:
                raise ConfigError(f"object {name!r} has no recognised kind")
        except (nl.NetlangError, ValueError, KeyError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"object {name!r}: {exc}") from exc


def task_order(tasks: list[dict]) -> list[list[dict]]:
    """Group tasks into dependency levels; raise on cycles or unknown references."""
    ids = {}
    for i, t in enumerate(tasks):
        t.setdefault("id", f"task{i + 1}")
        if t["id"] in ids:
            raise ConfigError(f"duplicate task id {t['id']!r}")
        if "op" not in t:
            raise ConfigError(f"task {t['id']!r} has no op")
        ids[t["id"]] = t

    def refs(obj):
        if isinstance(obj, str) and obj.startswith("$"):
            yield obj[1:]
        elif isinstance(obj, dict):
            for v in obj.values():
                yield from refs(v)
        elif isinstance(obj, list):
            for v in obj:
                yield from refs(v)

    deps = {}
    for t in tasks:
        d = set(refs(t.get("args", {})))
        unknown = d - set(ids)
        if unknown:
            raise ConfigError(f"task {t['id']!r} references unknown task(s) {sorted(unknown)}")
        deps[t["id"]] = d
    levels, done = [], set()
    while len(done) < len(tasks):
        ready = [t for t in tasks if t["id"] not in done and deps[t["id"]] <= done]
        if not ready:
            raise ConfigError("task references form a cycle")
        levels.append(ready)
        done |= {t["id"] for t in ready}
    return levels


# ---------------------------------------------------------------------------
# tasks


@dataclass
class Outcome:
    verdict: sc.Verdict | None = None
    value: object = None
    numbers: dict = field(default_factory=dict)  # quantity -> GenNumber, for traces
    extra: dict = field(default_factory=dict)


def _probes(ctx: Context, args, key="probes", default=None):
    raw = args.get(key, default)
    if raw is None:
        return [ctx.number(args.get("at", 0))]
    return [ctx.number(p) for p in raw]


def _op_classify(ctx, a):
    x = ctx.number(a["x"])
    c = sc.classify(x)
    return Outcome(value=c.as_dict(), numbers={"x": x})


def _op_order(ctx, a):
    x = ctx.number(a["x"])
    o = x.order()
    return Outcome(value={"order": o.value, "exact": o.exact, "ci": o.ci, "detail": o.detail}, numbers={"x": x})


def _relation(fn):
    def op(ctx, a):
        x, y = ctx.number(a["a"]), ctx.number(a["b"])
        v = fn(x, y, a.get("N", ctx.order))
        return Outcome(v, numbers={"a": x, "b": y})

    return op


def _op_invertible(ctx, a):
    x = ctx.number(a["x"])
    return Outcome(sc.is_invertible(x, a.get("N", ctx.order)), numbers={"x": x})


def _op_mayer(ctx, a):
    x = ctx.number(a["x"])
    res = sc.mayer_conditions(x, a.get("N", ctx.order))
    vals = {v.value for v in res.values()}
    agree = sc.Verdict(sc.Truth.TRUE if len(vals) == 1 else sc.Truth.FALSE, ctx.order, "symbolic",
                       "the four criteria agree" if len(vals) == 1 else "the criteria disagree")
    return Outcome(agree, value={k: v.as_dict() for k, v in res.items()}, numbers={"x": x})


def _op_member(ctx, a):
    z = ctx.number(a["z"])
    S = ctx.objects.get(a["set"])
    if not isinstance(S, st.InternalSet):
        raise ConfigError(f"{a['set']!r} is not a set")
    return Outcome(st.member(z, S, a.get("N", ctx.order)), numbers={"z": z})


def _op_evaluate(ctx, a):
    f = ctx.function(a["f"])
    z = ctx.number(a.get("at", 0))
    v = bf.evaluate(bf.BasicFunction(f), z, a.get("N", ctx.order), check_domain=False)
    out = Outcome(numbers={"value": v}, value=v.to_json())
    if "expect" in a:
        out.verdict = sc.eq(v, ctx.number(a["expect"]), a.get("N", ctx.order))
    return out


def _op_limit(ctx, a):
    f = ctx.function(a["f"], (a.get("var", "h"),))
    res = bf.sharp_limit(f, ctx.number(a.get("at", 0)), ctx.number(a.get("value", 0)), a.get("q", 3),
                         seed=ctx.seed, N=a.get("N", ctx.order))
    return Outcome(res.verdict, value={"witnesses": {str(k): v for k, v in res.witnesses.items()}})


def _op_weak_little_oh(ctx, a):
    f1 = ctx.function(a["f1"], ("h",))
    f2 = ctx.function(a["f2"], ("h",))
    res = bf.weak_little_oh(f1, f2, a.get("q", 3), seed=ctx.seed, N=a.get("N", ctx.order))
    return Outcome(res.verdict, value={"witnesses": {str(k): v for k, v in res.witnesses.items()}})


def _domain(ctx, a):
    d = a.get("domain")
    if d is None:
        return None
    S = ctx.objects.get(d)
    if not isinstance(S, st.InternalSet):
        raise ConfigError(f"{d!r} is not a set")
    return S


def _op_diff(ctx, a):
    f = ctx.function(a["f"])
    z = ctx.number(a.get("at", 0))
    ghf = holo.certify_eps_diff(f, z, Fraction(a.get("q", 1)), _domain(ctx, a), a.get("N", ctx.order), ctx.seed)
    out = Outcome(ghf.witness.little_oh, value=ghf.to_json(), numbers={"derivative": ghf.witness.m})
    if "expect" in a:
        out.verdict = sc.v_and(out.verdict, sc.eq(ghf.witness.m, ctx.number(a["expect"]), a.get("N", ctx.order)))
    return out


def _op_cauchy(ctx, a):
    f = ctx.function(a["f"])
    z = ctx.number(a.get("at", 0))
    radius = ctx.number(a["radius"]) if "radius" in a else None
    res = holo.cauchy_derivative(f, z, a.get("n", 1), radius, a.get("nodes", holo.DEFAULT_NODES))
    out = Outcome(value={"nodes": res.nodes.tolist()}, numbers={"derivative": res.value})
    if "expect" in a:
        out.verdict = sc.eq(res.value, ctx.number(a["expect"]), a.get("N", ctx.order))
    return out


def _op_jet(ctx, a):
    if "T" in a:
        emb = em.iota_embed(ctx.distribution(a["T"]), ctx.gauge, ctx.mollifier(a.get("mollifier")), probes=[])
        f = emb.net
    else:
        f = ctx.function(a["f"])
    z = ctx.number(a.get("at", 0))
    radius = ctx.number(a.get("radius", "rho/2"))
    jet = holo.taylor_jet(f, z, a.get("n", 12), radius)
    v = jet.verdict
    lo, hi = a.get("Q_range", [None, None])
    if lo is not None and not (lo <= jet.Q <= hi):
        v = sc.Verdict(sc.Truth.FALSE, None, "sampled", f"Q = {jet.Q:.4g} outside [{lo}, {hi}]")
    nums = {f"c{n}": c for n, c in enumerate(jet.coeffs)}
    return Outcome(v, value={"Q": jet.Q, "R": jet.R}, numbers=nums)


def _op_cre(ctx, a):
    f = ctx.function(a["f"])
    rec = holo.cre_residual(f, ctx.number(a.get("at", 0)))
    v1, v2 = rec.verdicts(a.get("N", ctx.order))
    expect = a.get("expect")
    if expect is None:
        verdict = sc.v_and(v1, v2)
    else:
        verdict = sc.v_and(sc.eq(rec.residuals[0], ctx.number(expect[0])), sc.eq(rec.residuals[1], ctx.number(expect[1])))
    return Outcome(verdict, value={"method": rec.method},
                   numbers={"residual1": rec.residuals[0], "residual2": rec.residuals[1]})


def _op_embed(ctx, a):
    T = ctx.distribution(a["T"])
    emb = em.iota_embed(T, ctx.gauge, ctx.mollifier(a.get("mollifier")), probes=[])
    z = ctx.number(a.get("at", 0))
    v = emb(z)
    out = Outcome(value={"holomorphy": emb.holomorphy, "value": v.to_json()}, numbers={"value": v})
    if "expect" in a:
        out.verdict = sc.eq(v, ctx.number(a["expect"]), a.get("N", ctx.order))
    return out


def _op_derivative_preservation(ctx, a):
    T = ctx.distribution(a["T"])
    v = em.derivative_preservation_check(T, tuple(a.get("alpha", (1, 0))), ctx.gauge, _probes(ctx, a),
                                         ctx.mollifier(a.get("mollifier")), a.get("N", 8))
    return Outcome(v)


def _op_delta_link(ctx, a):
    return Outcome(em.delta_1d_link_check(ctx.gauge, _probes(ctx, a), ctx.mollifier(a.get("mollifier")),
                                          a.get("N", ctx.order)))


def _op_uniqueness(ctx, a):
    res = em.mollifier_uniqueness_check(ctx.mollifier(a["mu1"]), ctx.mollifier(a["mu2"]), ctx.gauge,
                                        a.get("n_max", 8), [tuple(p) for p in a.get("pairs", [[1, 0]])],
                                        a.get("N", ctx.order))
    return Outcome(res.verdict, value={"witness": res.witness})


def _op_jmath(ctx, a):
    f = em.LocIntFunction.parse(a["f"])
    je = em.jmath_embed(f, ctx.gauge)
    F = f.fn()
    worst = 0.0
    for p in a.get("standard_probes", [[0.3, 0.1]]):
        z = complex(*p) if isinstance(p, list) else complex(p)
        worst = max(worst, abs(je.standard_part(z) - complex(F(np.array([z]))[0])))
    tol = a.get("tol", 1e-6)
    v = sc.Verdict(sc.Truth.TRUE if worst <= tol else sc.Truth.FALSE, None, "sampled",
                   f"max |st j(f) − f| = {worst:.3g} at standard probes")
    return Outcome(v, value={"cre_test": je.cre_test.as_dict()})


OPS = {
    "classify": _op_classify,
    "order": _op_order,
    "eq": _relation(sc.eq),
    "leq": _relation(sc.leq),
    "lt": _relation(sc.lt),
    "invertible": _op_invertible,
    "mayer": _op_mayer,
    "member": _op_member,
    "evaluate": _op_evaluate,
    "limit": _op_limit,
    "weak_little_oh": _op_weak_little_oh,
    "diff": _op_diff,
    "cauchy_derivative": _op_cauchy,
    "jet": _op_jet,
    "cre": _op_cre,
    "embed": _op_embed,
    "derivative_preservation": _op_derivative_preservation,
    "delta_link": _op_delta_link,
    "uniqueness": _op_uniqueness,
    "jmath": _op_jmath,
}

CLASSIFY_FLAGS = ("infinitesimal", "finite", "infinite", "nearStandard")


def _passed(task: dict, out: Outcome) -> bool | None:
    want = task.get("assert")
    if want is None or want is False:
        return None
    if task["op"] == "classify":
        got = out.value
        if want == "none-of-three":
            return all(got[k] == "False" for k in ("infinitesimal", "finite", "infinite"))
        flags = [want] if isinstance(want, str) else want
        if isinstance(flags, dict):
            return all((got[k] == "True") == bool(v) for k, v in flags.items())
        return all(got[k] == "True" for k in flags)
    if isinstance(want, str):
        # expected verdict value: "True", "False" or "Undecidable"
        return out.verdict is not None and out.verdict.value.value == want
    return out.verdict is not None and out.verdict.true


def run_task(ctx: Context, task: dict) -> dict:
    op = OPS.get(task["op"])
    if op is None:
        raise ConfigError(f"unknown op {task['op']!r} in task {task['id']!r}")
    rec = {"id": task["id"], "op": task["op"], "args": task.get("args", {})}
    try:
        out = op(ctx, task.get("args", {}))
    except ConfigError:
        raise
    except Exception as exc:  # noqa: BLE001 - task failures are reported, not raised
        rec.update(error=f"{type(exc).__name__}: {exc}", passed=False if task.get("assert") else None)
        return rec
    rec["verdict"] = out.verdict.as_dict() if out.verdict else None
    rec["value"] = _jsonable(out.value)
    rec["passed"] = _passed(task, out)
    rec["_numbers"] = out.numbers
    if out.numbers and task["id"] not in ctx.results:
        first = next(iter(out.numbers.values()))
        ctx.results[task["id"]] = first
    return rec


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return str(v)
    return v


# ---------------------------------------------------------------------------
# reports


def write_traces(ctx: Context, records: list[dict], outdir: Path) -> list[str]:
    tdir = outdir / "traces"
    tdir.mkdir(parents=True, exist_ok=True)
    rho = bf.rho_values(ctx.gauge)
    written = []
    for rec in records:
        nums = rec.get("_numbers") or {}
        if not nums:
            continue
        path = tdir / f"{rec['id']}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "rho_eps", "object", "quantity", "log_magnitude", "phase"])
            for qname, x in nums.items():
                s = x.samples()
                for e, r, lm, ph in zip(ctx.gauge.grid.points, rho, s.logmag, s.phase):
                    w.writerow([repr(float(e)), repr(float(r)), rec["id"], qname, repr(float(lm)), repr(float(ph))])
        written.append(str(path))
    return written


def run_config(config: dict, outdir: Path, emit: str = "both", overrides: dict | None = None) -> tuple[int, dict]:
    overrides = overrides or {}
    if not isinstance(config, dict) or "tasks" not in config:
        raise ConfigError("a config needs a 'tasks' list")
    gauge = make_gauge(overrides.get("gauge") or config.get("gauge", "eps"), overrides.get("grid") or config.get("grid"))
    ctx = Context(gauge, int(overrides.get("order") or config.get("order", sc.DEFAULT_ORDER)),
                  int(overrides.get("seed") if overrides.get("seed") is not None else config.get("seed", 0)))
    build_objects(ctx, config.get("objects", {}))
    tasks = [dict(t) for t in config["tasks"]]
    levels = task_order(tasks)
    threads = max(1, int(os.environ.get(THREADS_ENV, "1") or 1))
    records: dict[str, dict] = {}
    for level in levels:
        if threads > 1 and len(level) > 1:
            with ThreadPoolExecutor(threads) as pool:
                for t, rec in zip(level, pool.map(lambda t: run_task(ctx, t), level)):
                    records[t["id"]] = rec
        else:
            for t in level:
                records[t["id"]] = run_task(ctx, t)
    ordered = [records[t["id"]] for t in tasks]
    failures = [r for r in ordered if r.get("passed") is False]
    report = {
        "gauge": gauge.name,
        "grid": {"eps0": gauge.grid.eps0, "ratio": gauge.grid.ratio, "count": gauge.grid.count},
        "order": ctx.order,
        "seed": ctx.seed,
        "tasks": [{k: v for k, v in r.items() if not k.startswith("_")} for r in ordered],
        "summary": {
            "tasks": len(ordered),
            "asserted": sum(1 for r in ordered if r.get("passed") is not None),
            "failed": len(failures),
            "first_failure": failures[0]["id"] if failures else None,
        },
    }
    outdir.mkdir(parents=True, exist_ok=True)
    if emit in ("json", "both"):
        (outdir / "report.json").write_text(json.dumps(_jsonable(report), indent=2, default=str))
    if emit in ("csv", "both"):
        report["traces"] = write_traces(ctx, ordered, outdir)
    return (1 if failures else 0), report


def load_config(path: str) -> dict:
    if path in BUILTIN_CONFIGS:
        text = resources.files("ghf.configs").joinpath(BUILTIN_CONFIGS[path]).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc


# ---------------------------------------------------------------------------
# argument parsing


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--gauge", help="named gauge (eps, eps2, sqrt, exp) or an expression in eps")
    common.add_argument("--grid", help="eps0:ratio:count, default 0.5:0.7:24")
    common.add_argument("--order", type=int, help=f"asymptotic order N, default {sc.DEFAULT_ORDER}")
    common.add_argument("--seed", type=int, help="probe randomization seed")
    common.add_argument("--emit", choices=("json", "csv", "both"), default="both")
    common.add_argument("--out", default="ghf-out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ghf", description="Generalized holomorphic functions toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("classify", parents=[common], help="classify a generalized number")
    c.add_argument("expr")
    c.add_argument("--expect", help="assert a flag, e.g. infinitesimal or none-of-three")
    lim = sub.add_parser("limit", parents=[common], help="sharp limit of an expression in h")
    lim.add_argument("expr")
    lim.add_argument("--at", default="0")
    lim.add_argument("--value", default="0")
    lim.add_argument("--q", type=int, default=3)
    d = sub.add_parser("diff", parents=[common], help="certify ℂ̃-differentiability of a net in z")
    d.add_argument("expr")
    d.add_argument("--at", default="0")
    d.add_argument("--q", default="1")
    e = sub.add_parser("embed", parents=[common], help="evaluate ι(T) at a point")
    e.add_argument("dist", help="'delta' or a JSON distribution declaration")
    e.add_argument("--at", default="0")
    e.add_argument("--mollifier", default="gauss-entire")
    v = sub.add_parser("verify", parents=[common], help="decide a relation a OP b, exit 1 unless True")
    v.add_argument("a")
    v.add_argument("op", choices=("eq", "leq", "lt"))
    v.add_argument("b")
    r = sub.add_parser("run", parents=[common], help="run an experiment config")
    r.add_argument("config", help="path to a JSON config or a shipped name (delta-tour)")
    return p


def _single_task(args) -> dict:
    if args.command == "classify":
        task = {"id": "classify", "op": "classify", "args": {"x": args.expr}}
        if args.expect:
            task["assert"] = args.expect
    elif args.command == "limit":
        task = {"id": "limit", "op": "limit", "args": {"f": args.expr, "at": args.at, "value": args.value, "q": args.q}}
    elif args.command == "diff":
        task = {"id": "diff", "op": "diff", "args": {"f": args.expr, "at": args.at, "q": args.q}}
    elif args.command == "embed":
        dist = args.dist if args.dist == "delta" else json.loads(args.dist)
        task = {"id": "embed", "op": "embed", "args": {"T": dist, "at": args.at, "mollifier": args.mollifier}}
    else:
        task = {"id": "verify", "op": args.op, "args": {"a": args.a, "b": args.b}, "assert": True}
    return {"tasks": [task]}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {"gauge": args.gauge, "grid": args.grid, "order": args.order, "seed": args.seed}
    try:
        config = load_config(args.config) if args.command == "run" else _single_task(args)
        code, report = run_config(config, Path(args.out), args.emit, overrides)
    except (ConfigError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for t in report["tasks"]:
        mark = {True: "PASS", False: "FAIL", None: "----"}[t.get("passed")]
        what = t.get("error") or (t["verdict"]["value"] + ": " + t["verdict"]["detail"] if t.get("verdict")
                                  else json.dumps(t.get("value"), default=str)[:200])
        print(f"{mark} {t['id']} [{t['op']}] {what}")
    if code:
        first = report["summary"]["first_failure"]
        print(f"assertion failed: task {first!r}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
