"""``strobo`` command line: compile schedules, build DD sequences, verify.

Exit codes: 0 success, 2 certification failure, 3 resource cap, 4 input error.
The worker count for sweeps comes from ``STROBO_WORKERS`` (default 1).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import compiler, decoupling, verifier
from .lattice import GridLayout, Hole, build_code_terms
from .pauli import PhasedPauli, WeightedPauliSum
from .schedule import PulseSchedule

EXIT_OK, EXIT_CERT, EXIT_CAP, EXIT_INPUT = 0, 2, 3, 4


class InputError(ValueError):
    pass


@dataclass
class SweepGrid:
    min: float
    max: float
    points: int

    def __post_init__(self):
        if not (0 < self.min < self.max) or self.points < 2:
            raise InputError(f"sweep grid needs 0 < min < max and at least 2 points, got {self}")

    def values(self) -> list[float]:
        return [float(v) for v in np.logspace(math.log10(self.min), math.log10(self.max), self.points)]


@dataclass
class RunConfig:
    command: str = ""
    params: dict = field(default_factory=dict)
    output: str | None = None
    dt: SweepGrid = field(default_factory=lambda: SweepGrid(1e-3, 10 ** -1.5, 6))
    lam: float = 0.1
    h: SweepGrid = field(default_factory=lambda: SweepGrid(1.0, 100.0, 7))
    dense_cap: int = verifier.MAX_DENSE_QUBITS
    seed: int = 0
    workers: int = 1

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        params = {k: v for k, v in vars(args).items() if k not in _RESERVED and v is not None}
        cfg = cls(
            command=args.command,
            params=params,
            output=getattr(args, "out", None),
            dt=SweepGrid(args.dt_min, args.dt_max, args.dt_points),
            lam=args.lam,
            seed=args.seed,
            workers=_env_workers(),
        )
        if args.config:
            cfg = cfg.override(json.loads(Path(args.config).read_text()))
        if cfg.dense_cap > verifier.MAX_DENSE_QUBITS:
            raise InputError(f"dense cap cannot exceed {verifier.MAX_DENSE_QUBITS}")
        return cfg

    def override(self, data: dict) -> "RunConfig":
        d = asdict(self)
        for key, val in data.items():
            if key in ("dt", "h"):
                d[key] = {**d[key], **val}
            elif key == "params":
                d["params"] = {**d["params"], **val}
            elif key in d:
                d[key] = val
            else:
                d["params"][key] = val
        d["dt"], d["h"] = SweepGrid(**d["dt"]), SweepGrid(**d["h"])
        return RunConfig(**d)


_RESERVED = {"command", "config", "out", "dt_min", "dt_max", "dt_points", "lam", "seed", "func"}


def _env_workers() -> int:
    raw = os.environ.get("STROBO_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise InputError(f"STROBO_WORKERS must be an integer, got {raw!r}") from exc


def _mapper(cfg: RunConfig):
    if cfg.workers <= 1:
        return map
    pool = ThreadPoolExecutor(cfg.workers)
    return pool.map  # preserves input order


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text + ("" if text.endswith("\n") else "\n"))
    else:
        Path(path).write_text(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, default=str)


def _site(text: str | None):
    if not text:
        return None
    parts = [int(v) for v in text.split(",")]
    return tuple(parts)


def _grid(p: dict, rows=2, cols=2, connectivity="diagonal") -> GridLayout:
    return GridLayout(int(p.get("rows", rows)), int(p.get("cols", cols)), p.get("connectivity", connectivity))


# --------------------------------------------------------------------------
# compile


def cmd_compile(cfg: RunConfig) -> int:
    p = cfg.params
    target = p["target"]
    site = _site(p.get("site"))
    if target == "plaquette":
        rep = compiler.compile_plaquette(_grid(p), site, p.get("purge", "Z1 Y2"), bool(p.get("vertex", False)))
    elif target == "nn-vertex":
        rep = compiler.compile_nn_vertex(_grid(p, connectivity="nearest"), site)
    elif target == "pi4":
        rep = compiler.compile_pi4(_grid(p), site, float(p.get("theta", 0.0)), vertex=bool(p.get("vertex", False)))
    elif target in ("hole", "three-body", "single-body"):
        rep = compiler.compile_boundary(target.replace("-", "_"), site, _grid(p))
    elif target == "grid":
        holes = [Hole(tuple(int(v) for v in h.split(","))) for h in p.get("holes") or []]
        code = build_code_terms(_grid(p, 4, 4), holes)
        rep = compiler.compile_grid(code)
    elif target == "deformation":
        code = build_code_terms(_grid(p, 2, 3), boundary="none")
        s = compiler.compile_deformation(code, site or (0, 1), int(p.get("x_qubit", 1)), int(p.get("ntr", 8)),
                                         float(p.get("J", 1.0)), float(p.get("t1", 1.0)), int(p.get("order", 2)))
        _write(cfg.output, s.dumps())
        print(f"deformation: {len(s.events)} rotations, order {s.metadata['order']}, N_tr {s.metadata['n_tr']}",
              file=sys.stderr)
        return EXIT_OK
    else:
        raise InputError(f"unknown compile target {target!r}")
    s = rep.schedule.with_target(
        rep.declared_target, expected_residual_order=rep.expected_residual_order, certified=rep.certified
    )
    _write(cfg.output, s.dumps())
    print(f"steps: {rep.step_count}", file=sys.stderr)
    print(f"declared target: {rep.declared_target}", file=sys.stderr)
    print(f"certified: {rep.certified}", file=sys.stderr)
    for k, v in sorted(rep.notes.items()):
        print(f"{k}: {v}", file=sys.stderr)
    return EXIT_OK if rep.certified else EXIT_CERT


# --------------------------------------------------------------------------
# verify


def _symbolic_report(s: PulseSchedule) -> dict:
    ok, rep = compiler.certify(s, 3)
    return {
        "mode": "symbolic",
        "matches_target": bool(ok),
        "declared_target": str(s.declared_target),
        "magnus": rep.to_json(),
    }


def cmd_verify(cfg: RunConfig) -> int:
    path = cfg.params["schedule"]
    try:
        s = PulseSchedule.from_json(Path(path).read_text())
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read schedule {path}: {exc}") from exc
    n_bath = int(cfg.params.get("bath_qubits", 0))
    symbolic = bool(cfg.params.get("symbolic", False))
    n_total = s.n_qubits + n_bath
    if n_total > cfg.dense_cap and not symbolic:
        if n_bath:
            raise verifier.ResourceCapError(f"{n_total} qubits exceed the dense cap of {cfg.dense_cap}")
        symbolic = True
    if symbolic:
        report = _symbolic_report(s)
        _write(cfg.params.get("json"), _dumps(report))
        print(f"symbolic: matches_target={report['matches_target']}", file=sys.stderr)
        return EXIT_OK if report["matches_target"] else EXIT_CERT

    bath = verifier.BathModel.random(s.n_qubits, n_bath, cfg.lam, rng=cfg.seed) if n_bath else None
    dts = cfg.dt.values()
    reports, fit = verifier.residual_sweep(s, dts, bath=bath, mapper=_mapper(cfg))
    rows = [{"dt": r.dt_value, "residual": r.residual_norm} for r in reports]
    coeff_check = {}
    if s.declared_target is not None and bath is None:
        for t in s.declared_target:
            label = str(t.pauli)
            got = [r.coefficient(t.pauli) for r in reports]
            want = [float(t.coeff) * r.dt_value ** t.dt_power for r in reports]
            coeff_check[label] = [g / w - 1 if w else g for g, w in zip(got, want)]
    expected = s.metadata.get("expected_residual_order")
    report = {
        "mode": "dense",
        "n_qubits": s.n_qubits,
        "bath_qubits": n_bath,
        "lambda": cfg.lam if bath else None,
        "declared_target": str(s.declared_target),
        "sweep": rows,
        "fit": None if fit is None else fit._asdict(),
        "expected_residual_order": expected,
        "relative_coefficient_error": coeff_check,
        "max_residual": max(r["residual"] for r in rows),
    }
    csv_path = cfg.params.get("csv")
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dt", "residual", "fit_exponent", "fit_intercept"])
            for r in rows:
                w.writerow([repr(r["dt"]), repr(r["residual"]),
                            "" if fit is None else repr(fit.exponent), "" if fit is None else repr(fit.intercept)])
    _write(cfg.params.get("json"), _dumps(report))
    if fit is None:
        print(f"residual at noise floor (max {report['max_residual']:.2e}); schedule is exact", file=sys.stderr)
        return EXIT_OK
    print(f"residual slope {fit.exponent:.3f} (r2 {fit.r2:.5f})", file=sys.stderr)
    if expected is not None and bath is None and fit.exponent < expected - 0.1:
        return EXIT_CERT
    return EXIT_OK


# --------------------------------------------------------------------------
# dd


def _dd_by_name(name: str, n: int) -> decoupling.DDSequence:
    if name in ("u_sec", "universal"):
        return decoupling.universal_sequence(n)
    if name in ("u_sec+x", "lambda1"):
        return decoupling.lambda1_extension(decoupling.universal_sequence(n))
    raise InputError(f"unknown DD sequence {name!r}")


def cmd_dd(cfg: RunConfig) -> int:
    p = cfg.params
    kind = p["kind"]
    report: dict = {"kind": kind}
    if kind == "universal":
        seq = decoupling.universal_sequence(int(p.get("n", 4)))
        if p.get("extend"):
            seq = decoupling.lambda1_extension(seq)
        report["segments"] = seq.n_segments
        out = _dumps(seq.to_json())
    elif kind == "lemma1":
        gens = [g.strip() for g in (p.get("gens") or "").split(",") if g.strip()]
        n = int(p["n"]) if p.get("n") else max((PhasedPauli.from_string(g).n for g in gens), default=1)
        seq = decoupling.symmetrize_protecting([PhasedPauli.from_string(g, n) for g in gens], n)
        ok = _lemma1_selftest(seq, n)
        report.update(pulses=seq.n_segments, self_test=ok)
        out = _dumps(seq.to_json())
    elif kind == "lemma2":
        dims = tuple(int(v) for v in str(p.get("dims") or p.get("n", 6)).split("x"))
        seq = decoupling.symmetrize_local(int(p.get("l", 1)), int(p.get("D", len(dims))), dims)
        ok = _lemma2_selftest(seq, int(p.get("l", 1)), dims)
        report.update(pulses=seq.n_segments, self_test=ok)
        out = _dumps(seq.to_json())
    elif kind == "interleave":
        sim_path = p.get("sim")
        if not sim_path:
            raise InputError("interleave needs --sim SCHEDULE.json")
        sim = PulseSchedule.from_json(Path(sim_path).read_text())
        dd = _dd_by_name(p.get("dd", "u_sec"), sim.n_qubits)
        combined = decoupling.interleave(dd, sim)
        report.update(segments=combined.step_count, n_dd=dd.n_segments, n_sim=sim.step_count)
        out = combined.dumps()
    else:
        raise InputError(f"unknown dd kind {kind!r}")
    _write(cfg.output, out)
    for k, v in report.items():
        print(f"{k}: {v}", file=sys.stderr)
    return EXIT_OK if report.get("self_test", True) else EXIT_CERT


def _lemma1_selftest(seq: decoupling.DDSequence, n: int) -> bool:
    """Every Pauli either sums to ``|N(P)|`` times itself (group elements) or to zero."""
    from .pauli import span_contains

    group = list(seq.protected_group or [])
    for x in range(1 << n):
        for z in range(1 << n):
            p = PhasedPauli(n, x, z)
            avg = decoupling.twirl(seq.frames, p)
            if span_contains(group, p) if group else (x == 0 and z == 0):
                if avg != WeightedPauliSum.from_pauli(p) * seq.n_segments:
                    return False
            elif not avg.is_zero():
                return False
    return True


def _lemma2_selftest(seq: decoupling.DDSequence, l: int, dims: tuple) -> bool:
    """All errors supported on an ``l``-wide window average to zero."""
    return all(decoupling.twirl(seq.frames, p).is_zero() for p in decoupling.window_errors(l, dims))


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strobo", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override the flags")
    common.add_argument("--out", help="output path for the main artifact (default stdout)")
    common.add_argument("--dt-min", type=float, default=1e-3)
    common.add_argument("--dt-max", type=float, default=10 ** -1.5)
    common.add_argument("--dt-points", type=int, default=6)
    common.add_argument("--lam", type=float, default=0.1)
    common.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", parents=[common], help="compile a target schedule")
    c.add_argument("target", choices=["plaquette", "grid", "pi4", "hole", "three-body", "single-body",
                                      "deformation", "nn-vertex"])
    c.add_argument("--rows", type=int)
    c.add_argument("--cols", type=int)
    c.add_argument("--site", help="square as 'row,col' or explicit corner qubits 'a,b,c,d'")
    c.add_argument("--theta", type=float)
    c.add_argument("--purge")
    c.add_argument("--vertex", action="store_true", default=None)
    c.add_argument("--holes", nargs="*", help="hole squares as 'row,col'")
    c.add_argument("--ntr", type=int)
    c.add_argument("--order", type=int)
    c.add_argument("--x-qubit", type=int)
    c.add_argument("--J", type=float)
    c.add_argument("--t1", type=float)

    v = sub.add_parser("verify", parents=[common], help="dense or symbolic verification of a schedule")
    v.add_argument("schedule")
    v.add_argument("--bath-qubits", type=int)
    v.add_argument("--symbolic", action="store_true", default=None)
    v.add_argument("--csv", help="write the δt sweep as CSV")
    v.add_argument("--json", help="write the report as JSON (default stdout)")

    d = sub.add_parser("dd", parents=[common], help="build a decoupling sequence")
    d.add_argument("kind", choices=["universal", "lemma1", "lemma2", "interleave"])
    d.add_argument("--n", type=int)
    d.add_argument("--gens", help="comma-separated commuting generators, e.g. 'X1X2,X2X3'")
    d.add_argument("--l", type=int)
    d.add_argument("--D", type=int)
    d.add_argument("--dims", help="lattice dimensions such as '6' or '3x3'")
    d.add_argument("--extend", action="store_true", default=None)
    d.add_argument("--dd", help="sequence for interleave: u_sec or u_sec+x")
    d.add_argument("--sim", help="schedule JSON to interleave with")
    return ap


_COMMANDS = {"compile": cmd_compile, "verify": cmd_verify, "dd": cmd_dd}


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors, which would read as a failed certificate
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        cfg = RunConfig.from_args(args)
        return _COMMANDS[cfg.command](cfg)
    except verifier.ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except compiler.CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (InputError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
