"""``hybridseal`` command line: keys, KEM, signatures, envelopes, benchmarks, reports.

Exit codes: 0 success, 1 operation failed (bad signature, failed decryption),
2 usage or I/O error, 3 refused by policy (classical-only downgrade without
the confirmation flag).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric import ed25519, x25519

from hybridseal import __version__, bench, envelope, keyformat
from hybridseal.errors import (
    AuthenticationError,
    DowngradeRefusedError,
    HybridSealError,
    MalformedCiphertextError,
    MalformedEncodingError,
    MalformedKeyError,
    MalformedSignatureError,
    UnsupportedAlgorithmError,
    UnsupportedVersionError,
)
from hybridseal.kem import HybridCiphertext, HybridKEM, HybridKeyPair, HybridPublicKey
from hybridseal.primitives import CLASSICAL_ONLY_KEM, DEFAULT_KEM, Kind, algorithm, lookup_backend
from hybridseal.sign import HybridSign, HybridSigKeyPair, HybridSigPublicKey, HybridSignature
from hybridseal.stats import BootstrapConfig, classify_cov

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_POLICY = 3

SCHEMA_VERSION = 1
ROW_FIELDS = ("name", "n", "mean_us", "std_us", "median_us", "p95_us", "p99_us",
              "cov_pct", "ci95_lo_us", "ci95_hi_us")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("user counts must be positive")
    return values


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path: str, data: bytes | str) -> None:
    try:
        if isinstance(data, str):
            Path(path).write_text(data)
        else:
            Path(path).write_bytes(data)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _check_writable(path: str) -> None:
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise UsageError(f"cannot write {path}: directory not writable")
    if Path(path).is_dir():
        raise UsageError(f"cannot write {path}: is a directory")


def _load(path: str, expect: str | None = None):
    try:
        return keyformat.load(path, expect=expect)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_typed(path: str, types, what: str, expect: str | None = None):
    obj = _load(path, expect)
    if not isinstance(obj, types):
        raise UsageError(f"{path} holds a {type(obj).__name__}, expected a {what}")
    return obj


def _save_key(obj, prefix: str, fmt: str, part: str) -> str:
    path = f"{prefix}.{part}.{fmt}"
    _check_writable(path)
    keyformat.save(obj, path)
    return path


# -- key ---------------------------------------------------------------------

def cmd_key_gen(args) -> int:
    alg = algorithm(args.alg)
    classical_only = args.classical_only or alg == CLASSICAL_ONLY_KEM
    if classical_only and not args.i_understand_downgrade:
        print("refusing classical-only key: it has no post-quantum protection; "
              "add --i-understand-downgrade to proceed", file=sys.stderr)
        return EXIT_POLICY
    if classical_only:
        kp = HybridKEM(CLASSICAL_ONLY_KEM).generate_keypair(confirm_downgrade=True)
    elif alg.kind is Kind.KEM:
        kp = HybridKEM(alg).generate_keypair()
    else:
        kp = HybridSign(alg).generate_keypair()
    pub_path = _save_key(kp.public, args.out, args.format, "pub")
    key_path = _save_key(kp, args.out, args.format, "key")
    print(f"{kp.alg.name}: wrote {pub_path} and {key_path}")
    return EXIT_OK


def _classical_from_file(data: bytes, kind: Kind) -> bytes:
    if data.lstrip().startswith(b"-----BEGIN"):
        try:
            key = serialization.load_pem_private_key(data, password=None)
        except (ValueError, TypeError) as exc:
            raise MalformedEncodingError(f"unreadable PEM private key: {exc}") from None
        want = x25519.X25519PrivateKey if kind is Kind.KEM else ed25519.Ed25519PrivateKey
        if not isinstance(key, want):
            raise MalformedEncodingError(f"expected a {want.__name__[:-10]} private key")
        return key.private_bytes_raw()
    return data


def cmd_key_upgrade(args) -> int:
    kind = Kind(args.kind)
    secret = _classical_from_file(_read(args.input), kind)
    kp = keyformat.upgrade_classical(secret, kind)
    pub_path = _save_key(kp.public, args.out, args.format, "pub")
    key_path = _save_key(kp, args.out, args.format, "key")
    print(f"upgraded to {kp.alg.name}: wrote {pub_path} and {key_path}")
    return EXIT_OK


def cmd_key_inspect(args) -> int:
    data = _read(args.path)
    label = None
    if data.lstrip().startswith(b"-----BEGIN"):
        text = data.decode("ascii", errors="replace")
        label = text.split("-----BEGIN ", 1)[1].split("-----", 1)[0]
        obj = keyformat.pem_decode(text)
        raw = keyformat.CborHybridKey.from_bytes(keyformat.encode_cbor(obj))
    else:
        raw = keyformat.CborHybridKey.from_bytes(data)
    kinds = _shape_kinds(raw)
    if label == keyformat.PEM_PUBLIC_LABEL:
        kinds = keyformat.PUBLIC
    elif label == keyformat.PEM_PRIVATE_LABEL:
        kinds = keyformat.SECRET
    print(f"v: {raw.v}")
    print(f"alg: {raw.alg}")
    print(f"type: {kinds}")
    print(f"cls: {len(raw.cls)} bytes")
    print(f"pqc: {len(raw.pqc)} bytes")
    if raw.params is not None:
        print(f"params: {sorted(raw.params)}")
    if keyformat.SECRET not in kinds.split("/"):
        print(f"sha256: {hashlib.sha256(raw.to_bytes()).hexdigest()}")
    return EXIT_OK


def _shape_kinds(raw: keyformat.CborHybridKey) -> str:
    alg = algorithm(raw.alg)
    shapes = keyformat._shapes(lookup_backend(alg))
    got = (len(raw.cls), len(raw.pqc))
    kinds = [k for k, shape in shapes.items() if shape == got]
    if not kinds:
        raise MalformedEncodingError(f"component lengths {got} match no {raw.alg} object")
    return "/".join(kinds)


# -- kem / sign / envelope -----------------------------------------------------

def _confirm(obj, args) -> bool:
    return obj.alg == CLASSICAL_ONLY_KEM and args.i_understand_downgrade


def cmd_kem_encap(args) -> int:
    pub = _load_typed(args.pub, HybridPublicKey, "KEM public key", keyformat.PUBLIC)
    ct, ss = HybridKEM(pub.alg).encapsulate(pub, confirm_downgrade=_confirm(pub, args))
    _check_writable(args.out)
    _write(args.out, keyformat.encode_cbor(ct))
    if args.secret_out:
        _write(args.secret_out, bytes(ss))
    else:
        print(bytes(ss).hex())
    return EXIT_OK


def cmd_kem_decap(args) -> int:
    kp = _load_typed(args.key, HybridKeyPair, "KEM private key", keyformat.SECRET)
    ct = keyformat.decode_cbor(_read(args.ct), expect=keyformat.CIPHERTEXT)
    if not isinstance(ct, HybridCiphertext):
        raise UsageError(f"{args.ct} is not a KEM ciphertext")
    ss = HybridKEM(kp.alg).decapsulate(kp, ct, confirm_downgrade=_confirm(kp, args))
    if args.secret_out:
        _write(args.secret_out, bytes(ss))
    else:
        print(bytes(ss).hex())
    return EXIT_OK


def cmd_sign(args) -> int:
    kp = _load_typed(args.key, HybridSigKeyPair, "signing key", keyformat.SECRET)
    sig = HybridSign(kp.alg).sign(kp, _read(args.input))
    _check_writable(args.out)
    _write(args.out, keyformat.encode_cbor(sig))
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    pub = _load_typed(args.pub, (HybridSigPublicKey, HybridSigKeyPair), "signature public key",
                      keyformat.PUBLIC)
    sig = keyformat.decode_cbor(_read(args.sig), expect=keyformat.SIGNATURE)
    if not isinstance(sig, HybridSignature):
        raise UsageError(f"{args.sig} is not a signature")
    if HybridSign(pub.alg).verify(pub, _read(args.input), sig):
        print("valid")
        return EXIT_OK
    print("INVALID", file=sys.stderr)
    return EXIT_FAILED


def cmd_envelope_seal(args) -> int:
    pub = _load_typed(args.pub, HybridPublicKey, "KEM public key", keyformat.PUBLIC)
    if pub.alg == CLASSICAL_ONLY_KEM:
        raise DowngradeRefusedError("envelopes require a hybrid recipient key")
    env = envelope.seal(pub, _read(args.input), args.aad.encode())
    _check_writable(args.out)
    _write(args.out, env.to_bytes())
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_envelope_open(args) -> int:
    kp = _load_typed(args.key, HybridKeyPair, "KEM private key", keyformat.SECRET)
    plaintext = envelope.open_envelope(kp, _read(args.input))
    if args.out == "-":
        sys.stdout.buffer.write(plaintext)
    else:
        _check_writable(args.out)
        _write(args.out, plaintext)
    return EXIT_OK


# -- bench ---------------------------------------------------------------------

def _harness_config(args) -> bench.HarnessConfig:
    cores = tuple(args.pin) if args.pin else None
    return bench.HarnessConfig(
        iterations=args.iterations,
        warmup=args.warmup,
        trim_pct=args.trim_pct,
        runs=args.runs,
        pinned_cores=cores,
        bootstrap=BootstrapConfig(seed=args.seed),
    )


def result_file(records, cfg: bench.HarnessConfig, **extra) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "env": bench.env_fingerprint(),
        "config": cfg.as_dict(),
        "operations": [r.row() for r in records],
    }
    doc.update(extra)
    return doc


def _fmt_row(cells, widths) -> str:
    return "  ".join(str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))


def format_table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = [_fmt_row(header, widths), "  ".join("-" * w for w in widths)]
    lines += [_fmt_row(r, widths) for r in rows]
    return "\n".join(lines)


def _op_table(rows: list[dict]) -> str:
    header = ("operation", "median us", "mean us", "p95 us", "p99 us", "CoV %", "95% CI (median)")
    body = [(r["name"], f"{r['median_us']:.2f}", f"{r['mean_us']:.2f}", f"{r['p95_us']:.2f}",
             f"{r['p99_us']:.2f}", f"{r['cov_pct']:.1f}",
             f"[{r['ci95_lo_us']:.2f}, {r['ci95_hi_us']:.2f}]") for r in rows]
    return format_table(header, body)


def _save_result(doc: dict, path: str | None) -> None:
    if not path:
        return
    for row in doc["operations"]:
        for key in ROW_FIELDS[1:]:
            if not math.isfinite(row[key]):
                raise UsageError(f"non-finite {key} for {row['name']}; not saving")
    _write(path, json.dumps(doc, indent=2) + "\n")
    print(f"saved {path}")


def cmd_bench(args) -> int:
    if args.save:
        _check_writable(args.save)
    cfg = _harness_config(args)
    if args.which == "kem":
        floor = bench.noise_floor(cfg)
        dec = bench.bench_kem_decomposition(cfg)
        records = dec.records + [floor]
        derived = {f"combiner-overhead-{k}_us": v for k, v in dec.combiner_overhead.items()}
        derived["full-handshake_us"] = dec.full_handshake
        doc = result_file(records, cfg, derived=derived)
        rows = {r["name"]: r for r in doc["operations"]}
        for tier, names in bench.KEM_TIERS.items():
            print(f"\ntier {tier}")
            print(_op_table([rows[n] for n in names]))
        print()
        print(format_table(("derived", "us"), [(k, f"{v:.2f}") for k, v in derived.items()]))
        print()
        print(_op_table([rows[bench.NOISE_FLOOR_OP]]))
        bench.handshake_latency_warning(dec.full_handshake)
    elif args.which == "sig":
        floor = bench.noise_floor(cfg)
        records = bench.bench_signatures(cfg) + [floor]
        doc = result_file(records, cfg)
        print(_op_table(doc["operations"]))
    else:
        records = []
        results = bench.bench_concurrency(args.users, cfg, window_s=args.window)
        doc = result_file(records, cfg, concurrency=[r.as_dict() for r in results],
                          window_s=args.window)
        body = [(r.users, f"{r.median_latency:.2f}", f"{r.p95:.2f}", f"{r.throughput:.1f}",
                 f"{r.cov:.1f}", r.total_ops) for r in results]
        print(format_table(("users", "median ms", "p95 ms", "ops/s", "CoV %", "ops"), body))
    for rec in records:
        for note in rec.warnings:
            print(f"warning: {rec.op_name}: {note}", file=sys.stderr)
    _save_result(doc, args.save)
    return EXIT_OK


# -- report ----------------------------------------------------------------------

def render_report(doc: dict, baseline_op: str, markdown: bool = False) -> str:
    """CoV classification table with the difference to the baseline in percentage points."""
    ops = doc.get("operations")
    if not isinstance(ops, list) or not ops:
        raise UsageError("result file has no operations")
    by_name = {}
    for row in ops:
        missing = [k for k in ("name", "cov_pct") if k not in row]
        if missing:
            raise UsageError(f"operation row lacks {', '.join(missing)}")
        by_name[row["name"]] = row
    if baseline_op not in by_name:
        raise UsageError(f"baseline {baseline_op!r} not in file; available: {', '.join(by_name)}")
    base = float(by_name[baseline_op]["cov_pct"])
    body = []
    for row in ops:
        cov = float(row["cov_pct"])
        if row["name"] == baseline_op:
            body.append((row["name"], f"{cov:.1f}%", "---", "noise_floor"))
        else:
            body.append((row["name"], f"{cov:.1f}%", f"{cov - base:+.1f} pp", classify_cov(cov, base).value))
    header = ("operation", "CoV", "delta baseline", "assessment")
    if markdown:
        lines = ["| " + " | ".join(header) + " |", "|---|---:|---:|---|"]
        lines += ["| " + " | ".join(r) + " |" for r in body]
        return "\n".join(lines)
    return format_table(header, body)


def cmd_report(args) -> int:
    try:
        doc = json.loads(_read(args.path))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{args.path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"{args.path} is not a result file")
    print(render_report(doc, args.baseline, markdown=args.markdown))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridseal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    key = sub.add_parser("key", help="generate, upgrade or inspect keys")
    key_sub = key.add_subparsers(dest="key_command", required=True)
    gen = key_sub.add_parser("gen", help="generate a keypair")
    gen.add_argument("--alg", default=DEFAULT_KEM.name)
    gen.add_argument("--out", default="hybrid", help="output prefix (writes PREFIX.pub.EXT and PREFIX.key.EXT)")
    gen.add_argument("--format", choices=("chk", "pem"), default="chk")
    gen.add_argument("--classical-only", action="store_true")
    gen.add_argument("--i-understand-downgrade", action="store_true")
    gen.set_defaults(func=cmd_key_gen)
    up = key_sub.add_parser("upgrade", help="pair a classical key with a fresh PQC half")
    up.add_argument("--in", dest="input", required=True,
                    help="raw 32-byte X25519/Ed25519 secret or a PKCS#8 PEM")
    up.add_argument("--kind", choices=("kem", "sig"), default="kem")
    up.add_argument("--out", default="hybrid")
    up.add_argument("--format", choices=("chk", "pem"), default="chk")
    up.set_defaults(func=cmd_key_upgrade)
    ins = key_sub.add_parser("inspect", help="print version, algorithm and component lengths")
    ins.add_argument("path", nargs="?")
    ins.add_argument("--in", dest="in_path")
    ins.set_defaults(func=cmd_key_inspect)

    kem = sub.add_parser("kem", help="encapsulate / decapsulate")
    kem_sub = kem.add_subparsers(dest="kem_command", required=True)
    enc = kem_sub.add_parser("encap")
    enc.add_argument("--pub", required=True)
    enc.add_argument("--out", required=True, help="ciphertext output path")
    enc.add_argument("--secret-out", help="write the raw shared secret here instead of stdout")
    enc.add_argument("--i-understand-downgrade", action="store_true")
    enc.set_defaults(func=cmd_kem_encap)
    dec = kem_sub.add_parser("decap")
    dec.add_argument("--key", required=True)
    dec.add_argument("--ct", required=True)
    dec.add_argument("--secret-out")
    dec.add_argument("--i-understand-downgrade", action="store_true")
    dec.set_defaults(func=cmd_kem_decap)

    sig = sub.add_parser("sign", help="hybrid-sign a file")
    sig.add_argument("--key", required=True)
    sig.add_argument("--in", dest="input", required=True)
    sig.add_argument("--out", required=True)
    sig.set_defaults(func=cmd_sign)
    ver = sub.add_parser("verify", help="verify a hybrid signature (exit 1 if invalid)")
    ver.add_argument("--pub", required=True)
    ver.add_argument("--in", dest="input", required=True)
    ver.add_argument("--sig", required=True)
    ver.set_defaults(func=cmd_verify)

    env = sub.add_parser("envelope", help="seal / open files for a KEM recipient")
    env_sub = env.add_subparsers(dest="envelope_command", required=True)
    seal = env_sub.add_parser("seal")
    seal.add_argument("--pub", required=True)
    seal.add_argument("--in", dest="input", required=True)
    seal.add_argument("--out", required=True)
    seal.add_argument("--aad", default="")
    seal.set_defaults(func=cmd_envelope_seal)
    opn = env_sub.add_parser("open")
    opn.add_argument("--key", required=True)
    opn.add_argument("--in", dest="input", required=True)
    opn.add_argument("--out", default="-")
    opn.set_defaults(func=cmd_envelope_open)

    b = sub.add_parser("bench", help="run a benchmark program")
    b.add_argument("which", choices=("kem", "sig", "concurrency"))
    defaults = bench.HarnessConfig()
    b.add_argument("--iterations", type=_positive_int, default=defaults.iterations)
    b.add_argument("--warmup", type=_non_negative_int, default=defaults.warmup)
    b.add_argument("--runs", type=_positive_int, default=defaults.runs)
    b.add_argument("--trim-pct", type=float, default=defaults.trim_pct)
    b.add_argument("--seed", type=_non_negative_int, default=0, help="bootstrap RNG seed")
    b.add_argument("--pin", type=_int_list, help="comma-separated CPU cores to pin to")
    b.add_argument("--users", type=_int_list, default=[8, 64, 256])
    b.add_argument("--window", type=float, default=5.0, help="seconds per concurrency level")
    b.add_argument("--save", help="write the JSON result file here")
    b.set_defaults(func=cmd_bench)

    rep = sub.add_parser("report", help="CoV classification table from a result file")
    rep.add_argument("path")
    rep.add_argument("--baseline", default=bench.NOISE_FLOOR_OP)
    rep.add_argument("--markdown", action="store_true")
    rep.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "key" and args.key_command == "inspect":
        args.path = args.path or args.in_path
        if not args.path:
            parser.error("key inspect needs a file")
    if args.command == "bench":
        if args.iterations < 3:
            parser.error("--iterations must be at least 3")
        if not 0 <= args.trim_pct < 0.5:
            parser.error("--trim-pct must be in [0, 0.5)")
        if args.window <= 0:
            parser.error("--window must be positive")
        if args.users != sorted(args.users):
            parser.error("--users must be ascending")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DowngradeRefusedError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_POLICY
    except AuthenticationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (MalformedEncodingError, MalformedKeyError, MalformedCiphertextError,
            MalformedSignatureError, UnsupportedAlgorithmError, UnsupportedVersionError) as exc:
        # unreadable or unsupported input files count as I/O errors
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HybridSealError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
