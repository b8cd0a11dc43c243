"""Command-line interface: every check and construction as a JSON-emitting command."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import constructions as cons
from . import entropy as ent
from . import four_level as fl
from .linalg import PauliWord, matrix_from_json, matrix_to_json
from .subalgebra import (
    Subalgebra,
    complementarity_report,
    diagonal_masa,
    masa_from_basis,
    tensor_factor,
    transition_is_hadamard,
)

EXIT_OK, EXIT_FALSE, EXIT_USAGE = 0, 1, 2


class InputError(ValueError):
    """Bad command input (malformed JSON, wrong dimensions, missing file)."""


@dataclass
class CommandReport:
    command: dict
    verdicts: dict[str, Any] = field(default_factory=dict)
    artifacts: dict[str, Any] = field(default_factory=dict)
    elapsed_ms: float = 0.0
    seed: int = 0

    @property
    def exit_code(self) -> int:
        flags = [v for v in self.verdicts.values() if isinstance(v, bool)]
        return EXIT_OK if all(flags) else EXIT_FALSE

    def to_json(self, timing: bool = True) -> dict:
        out = {
            "command": self.command,
            "verdicts": self.verdicts,
            "artifacts": self.artifacts,
            "seed": self.seed,
        }
        if timing:
            out["elapsed_ms"] = self.elapsed_ms
        return out

    def to_table(self, timing: bool = True) -> str:
        args = " ".join(f"{k}={v}" for k, v in self.command["args"].items())
        lines = [f"command  {self.command['name']} {args}".rstrip(), f"seed     {self.seed}"]
        width = max((len(k) for k in self.verdicts), default=0)
        for name, value in self.verdicts.items():
            if isinstance(value, bool):
                shown = "PASS" if value else "FAIL"
            elif isinstance(value, float):
                shown = f"{value:.10g}"
            else:
                shown = json.dumps(value)
            lines.append(f"  {name:<{width}}  {shown}")
        if timing:
            lines.append(f"elapsed  {self.elapsed_ms:.1f} ms")
        return "\n".join(lines)


# -- input helpers ----------------------------------------------------------------------


def _load_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc


def _load_subalgebra(path: str) -> Subalgebra:
    try:
        return Subalgebra.from_json(_load_json(path))
    except InputError:
        raise
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_triplet(path: str) -> fl.Triplet:
    """A triplet file holds three matrices or three Pauli-word labels, optionally under ``"triplet"``."""
    obj = _load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("triplet")
    if not isinstance(obj, list) or len(obj) != 3:
        raise InputError(f"{path}: expected a list of three operators")
    try:
        mats = [PauliWord.parse(x).matrix if isinstance(x, str) else matrix_from_json(x) for x in obj]
        return fl.classify_triplet(*mats)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _same_dim(a: Subalgebra, b: Subalgebra) -> None:
    if a.ambient_dim != b.ambient_dim:
        raise InputError(f"dimension mismatch: {a.ambient_dim} vs {b.ambient_dim}")


# -- commands ------------------------------------------------------------------------------


def cmd_mub(args, report: CommandReport) -> None:
    n = args.dim
    if n < 1:
        raise InputError("--dim must be positive")
    f = cons.quantum_fourier(n)
    had = transition_is_hadamard(np.eye(n), f)
    comp = complementarity_report(diagonal_masa(n), masa_from_basis(f), seed=args.seed)
    report.verdicts.update(
        hadamard=had.holds,
        hadamard_residual=had.residual,
        complementary=comp.verdict,
    )
    report.artifacts.update(fourier=matrix_to_json(f), complementarity=comp.to_json())


def cmd_weyl(args, report: CommandReport) -> None:
    p = args.p
    try:
        alg = cons.weyl_subalgebra(args.u, args.v, p)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    report.verdicts["symplectic"] = float(cons.symplectic(args.u, args.v, p))
    report.verdicts["traceless_dim"] = float(alg.traceless_dim)
    for side in ("left", "right"):
        rep = complementarity_report(alg, tensor_factor(p, p, side), seed=args.seed)
        report.verdicts[f"complementary_{side}"] = rep.verdict
        report.artifacts[f"report_{side}"] = rep.to_json()
    report.artifacts["subalgebra"] = alg.to_json()


def cmd_check(args, report: CommandReport) -> None:
    a, b = _load_subalgebra(args.a), _load_subalgebra(args.b)
    _same_dim(a, b)
    rep = complementarity_report(a, b, seed=args.seed)
    report.verdicts.update(complementary=rep.verdict, conditions_agree=rep.consistent)
    report.artifacts["report"] = rep.to_json()


def cmd_entropy(args, report: CommandReport) -> None:
    a, b = _load_subalgebra(args.a), _load_subalgebra(args.b)
    _same_dim(a, b)
    if args.restarts < 0:
        raise InputError("--restarts must be non-negative")
    est = ent.estimate(a, b, restarts=args.restarts, seed=args.seed)
    report.verdicts["value_nats"] = est.value
    if est.bound is not None:
        report.verdicts["within_bound"] = bool(est.value <= est.bound + 1e-8)
        report.verdicts["gap"] = est.gap
    report.artifacts["estimate"] = est.to_json()


def cmd_bell_factorize(args, report: CommandReport) -> None:
    a = _load_subalgebra(args.a)
    t = _load_triplet(args.triplet)
    if a.ambient_dim != 4:
        raise InputError(f"dimension mismatch: the algebra lives in M_{a.ambient_dim}, expected M_4")
    try:
        fac = fl.bell_factorize(a, t)
    except fl.FactorizationError as exc:
        raise InputError(str(exc)) from exc
    report.verdicts.update(
        residual=fac.residual,
        round_trip=fac.residual < 1e-9,
        a_is_f_triplet=fac.a_triplet.kind == fl.F_KIND,
        b_is_f_triplet=fac.b_triplet.kind == fl.F_KIND,
    )
    report.artifacts["factorization"] = fac.to_json()


def cmd_catalog(args, report: CommandReport) -> None:
    cat = fl.enumerate_pauli_subalgebras()
    report.verdicts.update(
        masas=float(len(cat.masas)),
        factors=float(len(cat.factors)),
        total=float(len(cat.all)),
        bell_triple_is_masa=cat.find(["s11", "s22", "s33"]).kind == fl.M_KIND,
        right_qubit_is_factor=cat.find(["s01", "s02", "s03"]).kind == fl.F_KIND,
    )
    report.artifacts.update(
        masas=[e.to_json() for e in cat.masas],
        factors=[e.to_json() for e in cat.factors],
    )


def cmd_families(args, report: CommandReport) -> None:
    fams = fl.complementary_family_search()
    ells = sorted({f.ell for f in fams})
    found = {f.keys for f in fams}
    exhibited = {ell: fl.family_from_labels(t) for ell, t in fl.EXHIBITED_FAMILIES.items()}
    report.verdicts.update(
        families=float(len(fams)),
        ell_values_0_2_4=ells == [0, 2, 4],
        exhibited_families_found=all(
            f.keys in found and f.ell == ell and f.pairwise_ok for ell, f in exhibited.items()
        ),
        all_pairwise_complementary=all(f.pairwise_ok for f in fams),
        ell4_remainder_is_masa=all(
            sum(m.kind == fl.M_KIND for m in f.members) == 1 for f in fams if f.ell == 4
        ),
    )
    report.artifacts.update(ell_values=ells, families=[f.to_json() for f in fams])


def cmd_appendix(args, report: CommandReport) -> None:
    beta = args.beta
    if not (0 < beta < math.pi):
        raise InputError("--beta must lie strictly between 0 and pi")
    probe = ent.appendix_probe(beta)
    analytic = 0.5 * math.sin(beta) * math.log((1 - math.cos(beta)) / (1 + math.cos(beta)))
    report.verdicts.update(
        refuted=probe.refuted,
        margin=probe.margin,
        f0_equals_C=bool(abs(probe.f0 - probe.C) <= 1e-9),
        derivative_matches=bool(abs(probe.f_prime_0 - analytic) <= 1e-5),
    )
    report.artifacts["probe"] = probe.to_json()
    report.artifacts["analytic_f_prime_0"] = analytic


def cmd_car(args, report: CommandReport) -> None:
    car = cons.car_model()
    res = car.anticommutation_residuals()
    bell = cons.bell_masa()
    parity_res = max(float(np.max(np.abs(car.parity_map(p) - p))) for p in cons.bell_projectors())
    report.verdicts.update(
        anticommutation=max(res.values()) <= 1e-12,
        a1_a2_complementary=complementarity_report(car.A1, car.A2, seed=args.seed).verdict,
        bell_vs_a1=complementarity_report(bell, car.A1, seed=args.seed).verdict,
        bell_vs_a2=complementarity_report(bell, car.A2, seed=args.seed).verdict,
        parity_fixes_bell=parity_res <= 1e-12,
    )
    report.artifacts.update(
        anticommutation_residuals=res,
        parity_residual=parity_res,
        a1=matrix_to_json(car.a1),
        a2=matrix_to_json(car.a2),
    )


# -- parser ------------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--json", action="store_true", help="emit a JSON report")
    p.add_argument("--no-timing", action="store_true", help="omit elapsed time (byte-stable output)")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="quasiorth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, fn: Callable, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help)
        p.set_defaults(func=fn)
        return p

    add("mub", cmd_mub, "Fourier MUB and Hadamard check").add_argument("--dim", type=int, required=True)
    p = add("weyl", cmd_weyl, "Weyl subalgebra of M_p (x) M_p and its complementarity")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--u", type=int, nargs=4, default=[1, 0, 1, 0], metavar=("K1", "L1", "K2", "L2"))
    p.add_argument("--v", type=int, nargs=4, default=[0, 1, 0, 1], metavar=("K1", "L1", "K2", "L2"))
    for name, fn, text in (
        ("check", cmd_check, "complementarity report for two subalgebras"),
        ("entropy", cmd_entropy, "estimate H(A|B) with bound and gap"),
    ):
        p = add(name, fn, text)
        p.add_argument("--a", required=True, help="subalgebra JSON file")
        p.add_argument("--b", required=True, help="subalgebra JSON file")
    p.add_argument("--restarts", type=int, default=4)
    p = add("bell-factorize", cmd_bell_factorize, "factor an M-triplet across an F-subalgebra")
    p.add_argument("--a", required=True, help="F-subalgebra JSON file")
    p.add_argument("--triplet", required=True, help="M-triplet JSON file")
    add("catalog", cmd_catalog, "Pauli-spanned subalgebras of M_4")
    add("families", cmd_families, "complementary decompositions of M_4 into Pauli subalgebras")
    add("appendix", cmd_appendix, "probe the conjectured entropy formula").add_argument(
        "--beta", type=float, default=math.pi / 4
    )
    add("car", cmd_car, "two-mode CAR model checks")
    return parser


def run(argv: list[str] | None = None) -> tuple[CommandReport | None, int, argparse.Namespace | None]:
    """Parse and execute; returns ``(report, exit_code, namespace)``.

    Usage and input errors give ``(None, 2, ...)`` after writing a diagnostic
    to standard error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return None, EXIT_USAGE if exc.code else EXIT_OK, None
    echo = {k: v for k, v in vars(args).items() if k not in ("func", "command", "json", "no_timing")}
    report = CommandReport(command={"name": args.command, "args": echo}, seed=args.seed)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            args.func(args, report)
    except InputError as exc:
        print(f"quasiorth {args.command}: error: {exc}", file=sys.stderr)
        return None, EXIT_USAGE, args
    report.elapsed_ms = (time.perf_counter() - start) * 1e3
    return report, report.exit_code, args


def main(argv: list[str] | None = None) -> int:
    report, code, args = run(argv)
    if report is not None:
        timing = not args.no_timing
        if args.json:
            print(json.dumps(report.to_json(timing), indent=2))
        else:
            print(report.to_table(timing))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
