"""``lab`` command line: codes, smoothing, tensor norms, certificates, reports.

Exit codes: 0 success, 1 refused input (bad file, schema, precondition),
2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
import warnings
from pathlib import Path

import jsonschema

from . import __version__, schemas
from ._numeric import canonical_hash, stage_seed, to_fraction
from .errors import FamilyShortfallWarning, InvariantError, LabError, PreconditionError

REPORT_COLUMNS = ["m", "n", "p1", "p2", "p3", "q", "J_min", "alpha_min", "value", "runtime"]


class InputError(PreconditionError):
    pass


# -- io -------------------------------------------------------------------------

def load_json(path: str, schema: dict | None = None, what: str = "input") -> dict:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} file not found: {path}", module="cli")
    raw = p.read_bytes()
    try:
        text = raw.decode("utf-8")
        obj = json.loads(text)
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 at byte offset {exc.start}", module="cli") from None
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise InputError(f"{path}: malformed JSON at byte offset {offset}: {exc.msg}", module="cli") from None
    if schema is not None:
        validate(obj, schema, path)
    return obj


def validate(obj, schema: dict, label: str) -> None:
    errors = sorted(jsonschema.Draft202012Validator(schema).iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "$" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
        raise InputError(f"{label}: schema violation at {where}: {err.message}", module="cli")


def write_json(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def file_hash(path: str) -> str:
    return canonical_hash(json.loads(Path(path).read_text()))


class Manifest:
    """Run metadata embedded in every artifact."""

    def __init__(self, argv: list[str], seed: int, arithmetic: str):
        self.argv = argv
        self.seed = seed
        self.arithmetic = arithmetic
        self.inputs: dict = {}
        self.flags: dict = {}
        self.start = time.perf_counter()

    def add_input(self, path: str) -> None:
        self.inputs[path] = file_hash(path)

    def to_json(self) -> dict:
        return {
            "command": ["lab", *self.argv],
            "seed": self.seed,
            "arithmetic": self.arithmetic,
            "inputs": self.inputs,
            "version": __version__,
            "wall_clock": round(time.perf_counter() - self.start, 6),
            "regimes": self.flags,
        }


def _emit(obj: dict, args, manifest: Manifest) -> None:
    obj = dict(obj, manifest=manifest.to_json())
    write_json(obj, getattr(args, "output", None))


# -- commands -----------------------------------------------------------------------

def cmd_code_hadamard(args, manifest: Manifest) -> int:
    from .ldc import hadamard_code, identity_code

    build = identity_code if args.kind == "identity" else hadamard_code
    code, dec = build(args.m)
    if args.decoder_out:
        write_json(dict(dec.to_json(), manifest=manifest.to_json()), args.decoder_out)
    _emit(code.to_json(), args, manifest)
    return 0


def cmd_code_quality(args, manifest: Manifest) -> int:
    from .ldc import BinaryCode, LocalDecoder, evaluate_quality

    code = BinaryCode.from_json(load_json(args.code, schemas.CODE, "code"))
    dec = LocalDecoder.from_json(load_json(args.decoder, schemas.DECODER, "decoder"))
    manifest.add_input(args.code)
    manifest.add_input(args.decoder)
    seed = stage_seed(manifest.seed, "quality")
    report = evaluate_quality(code, dec, to_fraction(args.phi), args.mode, args.budget, seed)
    manifest.flags["quality"] = report.regime
    _emit(report.to_json(), args, manifest)
    return 0


def cmd_smooth(args, manifest: Manifest) -> int:
    from .ldc import BinaryCode, LocalDecoder
    from .smoothing import smooth

    code = BinaryCode.from_json(load_json(args.code, schemas.CODE, "code"))
    dec = LocalDecoder.from_json(load_json(args.decoder, schemas.DECODER, "decoder"))
    manifest.add_input(args.code)
    manifest.add_input(args.decoder)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", FamilyShortfallWarning)
        sc = smooth(code, dec, to_fraction(args.theta), to_fraction(args.phi))
    shortfalls = [str(w.message) for w in caught if issubclass(w.category, FamilyShortfallWarning)]
    for msg in shortfalls:
        print(f"warning: {msg}", file=sys.stderr)
    manifest.flags["smoothing"] = {"exact": True, "shortfalls": shortfalls}
    _emit(sc.to_json(), args, manifest)
    return 0


def _params(args, manifest: Manifest, stage: str):
    from .tensors import UPPER_STRATEGIES, BoundParams

    strategies = tuple(args.strategies) if getattr(args, "strategies", None) else UPPER_STRATEGIES
    return BoundParams(strategies=strategies, seed=stage_seed(manifest.seed, stage) % (1 << 32))


def cmd_tensor_norm(args, manifest: Manifest) -> int:
    from .tensors import SpaceSpec, Tensor3, best_lower, dual_lower, projective_upper

    T = Tensor3.from_json(load_json(args.file, schemas.TENSOR, "tensor"))
    manifest.add_input(args.file)
    if manifest.arithmetic == "float" and T.exact:
        T = Tensor3(T.to_float(), "float")
    spec = SpaceSpec(*args.p, T.n)
    params = _params(args, manifest, "tensor")
    upper = projective_upper(T, spec, params)
    lower = dual_lower(T, spec, args.lower, params) if args.lower else best_lower(T, spec, params)
    manifest.flags["tensor"] = {"upper": upper.method, "lower": lower.method}
    out = {"spec": spec.to_json(), "upper": upper.to_json(), "lower": lower.to_json()}
    _emit(out, args, manifest)
    return 0


def cmd_certify(args, manifest: Manifest) -> int:
    from .cotype import certify
    from .smoothing import SmoothedCode
    from .tensors import SpaceSpec

    obj = load_json(args.smoothed, schemas.SMOOTHED, "smoothed code")
    manifest.add_input(args.smoothed)
    sc = SmoothedCode.from_json(obj)
    theta = to_fraction(args.theta) if args.theta is not None else sc.theta
    spec = SpaceSpec(*args.p, sc.three_n)
    params = _params(args, manifest, "certify")
    cert = certify(sc, spec, to_fraction(args.q), theta, params, tuple(args.lower or ()), args.override_assumption)
    manifest.flags["certify"] = {"upper_methods": sorted({b.method for _, b in cert.per_sign})}
    _emit(cert.to_json(), args, manifest)
    return 0


def cmd_verify(args, manifest: Manifest) -> int:
    from .suites import SUITES

    seed = stage_seed(manifest.seed, f"verify:{args.suite}") % (1 << 32)
    checks = SUITES[args.suite](seed)
    failed = 0
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
        failed += not ok
    if failed:
        raise InvariantError(f"suite:{args.suite}", f"{failed} check(s) failed", module="cli")
    return 0


def certificate_rows(certs: list[dict]) -> list[dict]:
    rows = []
    for c in certs:
        p = c["spec"]["p"]
        rows.append({
            "m": int(c["m"]), "n": int(c["n"]), "p1": p[0], "p2": p[1], "p3": p[2], "q": c["q"],
            "J_min": int(c["J_min"]), "alpha_min": c["alpha_min"], "value": c["value"], "runtime": c.get("runtime", ""),
        })
    rows.sort(key=lambda r: (r["m"], to_fraction(r["q"])))
    return rows


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _sweep(args, manifest: Manifest) -> list[dict]:
    from .cotype import certify
    from .ldc import hadamard_code
    from .smoothing import smooth
    from .tensors import SpaceSpec

    theta = to_fraction(args.theta)
    phi = to_fraction(args.phi)
    certs = []
    for m in args.hadamard_sweep:
        code, dec = hadamard_code(m)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FamilyShortfallWarning)
            sc = smooth(code, dec, theta, phi)
        for q in args.q:
            cert = certify(sc, SpaceSpec(*args.p, sc.three_n), to_fraction(q), theta, _params(args, manifest, f"sweep:{m}"))
            certs.append(cert.to_json())
    return certs


def cmd_report(args, manifest: Manifest) -> int:
    certs = []
    for path in args.certificates:
        obj = load_json(path, None, "certificate")
        try:
            validate(obj, schemas.CERTIFICATE, path)
        except InputError as exc:
            raise InputError(f"mixed-schema input refused: {exc.detail}", module="cli") from None
        manifest.add_input(path)
        certs.append(obj)
    if args.hadamard_sweep:
        certs.extend(_sweep(args, manifest))
    text = render_csv(certificate_rows(certs))
    if args.output and args.output != "-":
        Path(args.output).write_text(text)
        Path(args.output + ".manifest.json").write_text(json.dumps(manifest.to_json(), indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return 0


# -- parser -----------------------------------------------------------------------------

def _exponent(text: str):
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lab", description=__doc__.splitlines()[0])
    parser.add_argument("--arithmetic", choices=["rational", "float"], default="rational")
    parser.add_argument("--seed", type=int, default=None, help="run seed (default: $LAB_SEED or 0)")
    parser.add_argument("--version", action="version", version=f"lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    code = sub.add_parser("code", help="build codes and measure decoding quality")
    code_sub = code.add_subparsers(dest="code_command", required=True)
    for kind in ("hadamard", "identity"):
        p = code_sub.add_parser(kind, help=f"{kind} code with its 3-query decoder")
        p.add_argument("--m", type=int, required=True)
        p.add_argument("-o", "--output")
        p.add_argument("--decoder-out", help="also write the decoder JSON here")
        p.set_defaults(func=cmd_code_hadamard, kind=kind)
    p = code_sub.add_parser("quality", help="worst-case decoding margin under corruption")
    p.add_argument("--code", required=True)
    p.add_argument("--decoder", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    p.add_argument("--budget", type=int, default=10**7)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_code_quality)

    p = sub.add_parser("smooth", help="harvest disjoint decoding triples")
    p.add_argument("--code", required=True)
    p.add_argument("--decoder", required=True)
    p.add_argument("--theta", required=True)
    p.add_argument("--phi", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_smooth)

    tensor = sub.add_parser("tensor", help="tensor norm bounds")
    tsub = tensor.add_subparsers(dest="tensor_command", required=True)
    p = tsub.add_parser("norm", help="certified upper and lower bounds")
    p.add_argument("--file", required=True)
    p.add_argument("--p", nargs=3, required=True, type=_exponent, metavar=("P1", "P2", "P3"))
    p.add_argument("--lower", choices=["rank_one_ascent", "diagonal_functional", "entry_functional", "lp_dual"])
    p.add_argument("--strategies", nargs="+", choices=["rank_one", "diagonal", "slicing", "peeling", "lp_vertex"])
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_tensor_norm)

    p = sub.add_parser("certify", help="cotype lower-bound certificate")
    p.add_argument("--smoothed", required=True)
    p.add_argument("--p", nargs=3, required=True, type=_exponent, metavar=("P1", "P2", "P3"))
    p.add_argument("--q", required=True)
    p.add_argument("--theta", help="defaults to the smoothed code's theta")
    p.add_argument("--lower", nargs="+", choices=["rank_one_ascent", "diagonal_functional", "entry_functional", "lp_dual"],
                   help="extra witness lower bounds (max with the symmetrization bound)")
    p.add_argument("--strategies", nargs="+", choices=["rank_one", "diagonal", "slicing", "peeling", "lp_vertex"])
    p.add_argument("--override-assumption", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", help="run a built-in verification suite")
    p.add_argument("--suite", choices=["identities", "symmetrization", "sandwich"], required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="CSV summary of certificates")
    p.add_argument("certificates", nargs="*")
    p.add_argument("--hadamard-sweep", nargs="+", type=int, metavar="M", help="also certify Hadamard codes of these m")
    p.add_argument("--p", nargs=3, default=["3", "3", "3"], metavar=("P1", "P2", "P3"))
    p.add_argument("--q", nargs="+", default=["2"])
    p.add_argument("--theta", default="1/16")
    p.add_argument("--phi", default="1/16")
    p.add_argument("--strategies", nargs="+", choices=["rank_one", "diagonal", "slicing", "peeling", "lp_vertex"])
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


def resolve_seed(cli_seed: int | None) -> int:
    if cli_seed is not None:
        return cli_seed
    env = os.environ.get("LAB_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"LAB_SEED={env!r} is not an integer", module="cli") from None


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    try:
        manifest = Manifest(argv, resolve_seed(args.seed), args.arithmetic)
        return args.func(args, manifest)
    except InvariantError as exc:
        print(f"invariant violated ({exc.invariant}): {exc}", file=sys.stderr)
        return 2
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: [cli] invalid input: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # anything else is a bug, reported as an invariant failure
        print(f"invariant violated (unexpected_error): {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
