"""Measurement harness and the KEM, signature, concurrency and noise-floor benchmarks.

Per run: ``warmup`` untimed calls, then ``iterations`` calls timed with
``time.perf_counter_ns`` while the garbage collector is off, then a 1% trim
and a summary. Of ``runs`` runs the one with the lowest median is kept;
programs interleave the runs of their operations round-robin.

Operations may take a ``setup`` callable that runs untimed before every
iteration and returns the arguments for that iteration; this is how fresh
keys and messages are produced per call.
"""

from __future__ import annotations

import gc
import logging
import os
import platform
import sys
import threading
import time
import traceback
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from cryptography.hazmat.primitives.asymmetric import ed25519, mldsa, mlkem, x25519

import hybridseal
from hybridseal import keyformat
from hybridseal.errors import InvalidParameterError
from hybridseal.kem import HybridKEM
from hybridseal.primitives import AEAD_KEY_LEN, AEAD_NONCE_LEN, aead_seal
from hybridseal.sign import HybridSign
from hybridseal.stats import BootstrapConfig, StatSummary, TimingSampleSet, summarize

log = logging.getLogger(__name__)

__all__ = [
    "HarnessConfig",
    "BenchRecord",
    "ConcurrencyResult",
    "KemDecomposition",
    "env_fingerprint",
    "measure_timer_resolution",
    "run_op",
    "run_ops",
    "bench_kem_decomposition",
    "bench_signatures",
    "bench_concurrency",
    "noise_floor",
    "full_handshake",
    "NOISE_FLOOR_OP",
    "KEM_OPS",
    "SIG_OPS",
]

NOISE_FLOOR_OP = "aead-enc-1kb"
LOW_SAMPLE_THRESHOLD = 100
HARNESS_OVERHEAD_LIMIT = 0.05
MSG_LEN = 32

KEM_TIERS = {
    1: ("x25519-keygen", "x25519-dh"),
    2: ("mlkem768-keygen", "mlkem768-encap", "mlkem768-decap"),
    3: ("hybrid-kem-keygen", "hybrid-kem-encap", "hybrid-kem-decap"),
}
KEM_OPS = [name for tier in KEM_TIERS.values() for name in tier]
# combiner overhead = tier 3 - tier 1 - tier 2, paired per operation class
OVERHEAD_TERMS = {
    "keygen": ("hybrid-kem-keygen", "x25519-keygen", "mlkem768-keygen"),
    "encap": ("hybrid-kem-encap", "x25519-dh", "mlkem768-encap"),
    "decap": ("hybrid-kem-decap", "x25519-dh", "mlkem768-decap"),
}
SIG_OPS = [
    "ed25519-sign", "ed25519-verify",
    "mldsa65-keygen", "mldsa65-sign", "mldsa65-verify",
    "hybrid-sig-keygen", "hybrid-sig-sign", "hybrid-sig-verify",
]


@dataclass(frozen=True)
class HarnessConfig:
    iterations: int = 3000
    warmup: int = 100
    trim_pct: float = 0.01
    runs: int = 3
    pinned_cores: tuple[int, ...] | None = None
    gc_control: str = "disable_if_supported"
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)

    def __post_init__(self):
        if self.iterations < 3:
            raise InvalidParameterError(f"iterations must be >= 3, got {self.iterations}")
        if self.warmup < 0:
            raise InvalidParameterError(f"warmup must be >= 0, got {self.warmup}")
        if self.runs < 1:
            raise InvalidParameterError(f"runs must be >= 1, got {self.runs}")
        if self.gc_control not in ("disable_if_supported", "none"):
            raise InvalidParameterError(f"unknown gc_control {self.gc_control!r}")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pinned_cores"] = list(self.pinned_cores) if self.pinned_cores else None
        return d


@dataclass
class BenchRecord:
    op_name: str
    summary: StatSummary
    run_index: int
    env_fingerprint: dict
    run_medians: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    samples: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        s = self.summary
        return {
            "name": self.op_name,
            "n": s.n,
            "mean_us": s.mean,
            "std_us": s.std,
            "median_us": s.median,
            "p95_us": s.p95,
            "p99_us": s.p99,
            "cov_pct": s.cov,
            "ci95_lo_us": s.ci95_lo,
            "ci95_hi_us": s.ci95_hi,
        }


@dataclass
class ConcurrencyResult:
    users: int
    median_latency: float  # ms
    p95: float  # ms
    throughput: float  # ops/s
    cov: float  # percent
    total_ops: int
    worker_ops: list[int]
    wall_seconds: float

    def as_dict(self) -> dict:
        d = asdict(self)
        d["median_latency_ms"] = d.pop("median_latency")
        d["p95_ms"] = d.pop("p95")
        d["throughput_ops_s"] = d.pop("throughput")
        d["cov_pct"] = d.pop("cov")
        return d


@dataclass
class KemDecomposition:
    records: list[BenchRecord]
    combiner_overhead: dict[str, float]
    full_handshake: float

    def by_name(self) -> dict[str, BenchRecord]:
        return {r.op_name: r for r in self.records}


def measure_timer_resolution(trials: int = 2000) -> float:
    """Smallest non-zero step of ``perf_counter_ns`` observed, in microseconds."""
    best = None
    for _ in range(trials):
        t0 = time.perf_counter_ns()
        t1 = time.perf_counter_ns()
        while t1 == t0:
            t1 = time.perf_counter_ns()
        step = t1 - t0
        if best is None or step < best:
            best = step
    return best / 1000.0


def _cpu_model() -> str:
    try:
        with open("/proc/cpuinfo") as fh:
            for line in fh:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def env_fingerprint() -> dict:
    from cryptography import __version__ as crypto_version
    from cryptography.hazmat.backends.openssl.backend import backend

    info = time.get_clock_info("perf_counter")
    affinity = sorted(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else None
    return {
        "os": f"{platform.system()} {platform.release()}",
        "machine": platform.machine(),
        "cpu_model": _cpu_model(),
        "cpu_count": os.cpu_count(),
        "affinity": affinity,
        "python": platform.python_version(),
        "implementation": platform.python_implementation(),
        "hybridseal": hybridseal.__version__,
        "cryptography": crypto_version,
        "openssl": backend.openssl_version_text(),
        "timer": "perf_counter_ns",
        "timer_monotonic": info.monotonic,
        "timer_declared_resolution_s": info.resolution,
        "timer_measured_resolution_us": measure_timer_resolution(),
    }


_ENV_CACHE: dict | None = None


def _env() -> dict:
    global _ENV_CACHE
    if _ENV_CACHE is None:
        _ENV_CACHE = env_fingerprint()
    return _ENV_CACHE


def _pin(cores) -> tuple[object, str | None]:
    if not cores:
        return None, None
    if not hasattr(os, "sched_setaffinity"):
        return None, "CPU pinning unsupported on this platform"
    previous = os.sched_getaffinity(0)
    try:
        os.sched_setaffinity(0, set(cores))
    except OSError as exc:
        return None, f"CPU pinning to {list(cores)} failed: {exc}"
    return previous, None


def _one_run(op: Callable, setup: Callable | None, cfg: HarnessConfig) -> np.ndarray:
    perf = time.perf_counter_ns
    for _ in range(cfg.warmup):
        if setup is None:
            op()
        else:
            op(*setup())
    out = np.empty(cfg.iterations, dtype=np.int64)
    gc_was_enabled = gc.isenabled()
    if cfg.gc_control == "disable_if_supported":
        gc.disable()
    try:
        if setup is None:
            for i in range(cfg.iterations):
                t0 = perf()
                op()
                out[i] = perf() - t0
        else:
            for i in range(cfg.iterations):
                args = setup()
                t0 = perf()
                op(*args)
                out[i] = perf() - t0
    finally:
        if gc_was_enabled:
            gc.enable()
    # a zero reading means "below one clock tick"; count it as one tick
    np.maximum(out, 1, out=out)
    return out / 1000.0


def run_op(op: Callable, cfg: HarnessConfig = HarnessConfig(), name: str = "op",
           setup: Callable[[], tuple] | None = None) -> BenchRecord:
    """Benchmark ``op`` and return the best (lowest-median) of ``cfg.runs`` runs."""
    return run_ops([(name, op, setup)], cfg)[0]


def run_ops(operations: Sequence[tuple[str, Callable, Callable | None]],
            cfg: HarnessConfig = HarnessConfig()) -> list[BenchRecord]:
    """Benchmark several ``(name, op, setup)`` triples, runs interleaved round-robin.

    Run ``r`` of every operation happens before run ``r + 1`` of any, so each
    operation's best-of-N draws from the same spread of time windows and slow
    drift of the host does not bias one operation against another.
    """
    env = _env()
    notes: list[str] = []
    if cfg.iterations < LOW_SAMPLE_THRESHOLD:
        notes.append(f"low-sample: {cfg.iterations} iterations < {LOW_SAMPLE_THRESHOLD}")
    if env["timer_measured_resolution_us"] > 1.0:
        notes.append(
            f"environment-unsuitable: timer resolution {env['timer_measured_resolution_us']:.3f} us > 1 us"
        )
    previous_affinity, pin_note = _pin(cfg.pinned_cores)
    if pin_note:
        notes.append(pin_note)
    env = dict(env, pinned_cores=sorted(cfg.pinned_cores) if previous_affinity is not None else None)
    best: list[tuple | None] = [None] * len(operations)
    medians: list[list[float]] = [[] for _ in operations]
    try:
        for run in range(cfg.runs):
            for i, (name, op, setup) in enumerate(operations):
                samples = _one_run(op, setup, cfg)
                sample_set = TimingSampleSet(samples, op_name=name, warmup_discarded=cfg.warmup,
                                             trim_pct=cfg.trim_pct)
                summary = summarize(sample_set, cfg.bootstrap)
                medians[i].append(summary.median)
                if best[i] is None or summary.median < best[i][1].median:
                    best[i] = (run, summary, samples)
    finally:
        if previous_affinity is not None:
            os.sched_setaffinity(0, previous_affinity)
    records = []
    for (name, _, _), (run, summary, samples), meds in zip(operations, best, medians):
        for note in notes:
            log.warning("%s: %s", name, note)
        records.append(BenchRecord(name, summary, run, dict(env), meds, list(notes), samples))
    return records


def _flag_harness_overhead(records: list[BenchRecord], cfg: HarnessConfig) -> BenchRecord:
    floor = run_op(lambda: None, cfg, "harness-floor")
    for rec in records:
        if floor.summary.median >= HARNESS_OVERHEAD_LIMIT * rec.summary.median:
            rec.warnings.append(
                f"harness floor {floor.summary.median:.3f} us is >= 5% of median {rec.summary.median:.3f} us"
            )
    return floor


def _x25519_pair():
    return x25519.X25519PrivateKey.generate(), x25519.X25519PrivateKey.generate().public_key()


def _mlkem_encap_setup():
    return (mlkem.MLKEM768PrivateKey.generate().public_key(),)


def _mlkem_decap_setup():
    sk = mlkem.MLKEM768PrivateKey.generate()
    _, ct = sk.public_key().encapsulate()
    return sk, ct


def kem_operations():
    """(name, op, setup) triples for the three KEM tiers.

    Tier 3 measures the wire path: keygen serializes the public key,
    encapsulate serializes the ciphertext, decapsulate parses it first.
    """
    kem = HybridKEM()

    def hybrid_keygen():
        kp = kem.generate_keypair()
        keyformat.encode_cbor(kp.public)

    def hybrid_encap(pub):
        ct, _ = kem.encapsulate(pub)
        keyformat.encode_cbor(ct)

    def hybrid_decap(kp, ct_bytes):
        kem.decapsulate(kp, keyformat.decode_cbor(ct_bytes, expect=keyformat.CIPHERTEXT))

    def hybrid_encap_setup():
        return (kem.generate_keypair().public,)

    def hybrid_decap_setup():
        kp = kem.generate_keypair()
        ct, _ = kem.encapsulate(kp.public)
        return kp, keyformat.encode_cbor(ct)

    return [
        ("x25519-keygen", lambda: x25519.X25519PrivateKey.generate().public_key().public_bytes_raw(), None),
        ("x25519-dh", lambda sk, pk: sk.exchange(pk), _x25519_pair),
        ("mlkem768-keygen", lambda: mlkem.MLKEM768PrivateKey.generate().public_key().public_bytes_raw(), None),
        ("mlkem768-encap", lambda pk: pk.encapsulate(), _mlkem_encap_setup),
        ("mlkem768-decap", lambda sk, ct: sk.decapsulate(ct), _mlkem_decap_setup),
        ("hybrid-kem-keygen", hybrid_keygen, None),
        ("hybrid-kem-encap", hybrid_encap, hybrid_encap_setup),
        ("hybrid-kem-decap", hybrid_decap, hybrid_decap_setup),
    ]


def bench_kem_decomposition(cfg: HarnessConfig = HarnessConfig(), *,
                            check_overhead: bool = True) -> KemDecomposition:
    records = run_ops(kem_operations(), cfg)
    if check_overhead:
        _flag_harness_overhead(records, cfg)
    med = {r.op_name: r.summary.median for r in records}
    overhead = {cls: med[h] - med[a] - med[b] for cls, (h, a, b) in OVERHEAD_TERMS.items()}
    handshake = sum(med[name] for name in KEM_TIERS[3])
    return KemDecomposition(records, overhead, handshake)


def _msg():
    return os.urandom(MSG_LEN)


def signature_operations():
    hs = HybridSign()

    def ed_sign_setup():
        return ed25519.Ed25519PrivateKey.generate(), _msg()

    def ed_verify_setup():
        sk, m = ed25519.Ed25519PrivateKey.generate(), _msg()
        return sk.public_key(), sk.sign(m), m

    def dsa_sign_setup():
        return mldsa.MLDSA65PrivateKey.generate(), _msg()

    def dsa_verify_setup():
        sk, m = mldsa.MLDSA65PrivateKey.generate(), _msg()
        return sk.public_key(), sk.sign(m), m

    def hybrid_sign_setup():
        return hs.generate_keypair(), _msg()

    def hybrid_verify_setup():
        kp, m = hs.generate_keypair(), _msg()
        return kp.public, m, hs.sign(kp, m)

    return [
        ("ed25519-sign", lambda sk, m: sk.sign(m), ed_sign_setup),
        ("ed25519-verify", lambda pk, sig, m: pk.verify(sig, m), ed_verify_setup),
        ("mldsa65-keygen", lambda: mldsa.MLDSA65PrivateKey.generate().public_key().public_bytes_raw(), None),
        ("mldsa65-sign", lambda sk, m: sk.sign(m), dsa_sign_setup),
        ("mldsa65-verify", lambda pk, sig, m: pk.verify(sig, m), dsa_verify_setup),
        ("hybrid-sig-keygen", hs.generate_keypair, None),
        ("hybrid-sig-sign", hs.sign, hybrid_sign_setup),
        ("hybrid-sig-verify", hs.verify, hybrid_verify_setup),
    ]


def bench_signatures(cfg: HarnessConfig = HarnessConfig(), *, check_overhead: bool = True,
                     only: Sequence[str] | None = None) -> list[BenchRecord]:
    records = run_ops([t for t in signature_operations() if only is None or t[0] in only], cfg)
    if check_overhead:
        _flag_harness_overhead(records, cfg)
    return records


def noise_floor(cfg: HarnessConfig = HarnessConfig()) -> BenchRecord:
    """AES-256-GCM encryption of 1 KB under a fresh key and nonce per iteration."""

    def setup():
        return os.urandom(AEAD_KEY_LEN), os.urandom(AEAD_NONCE_LEN), os.urandom(1024)

    return run_op(lambda k, n, pt: aead_seal(k, n, b"", pt), cfg, NOISE_FLOOR_OP, setup)


def full_handshake(kem: HybridKEM | None = None) -> None:
    """One keygen + encapsulate + decapsulate, as run by each concurrency worker."""
    kem = kem or HybridKEM()
    kp = kem.generate_keypair()
    ct, ss = kem.encapsulate(kp.public)
    if kem.decapsulate(kp, ct) != ss:
        raise RuntimeError("hybrid handshake produced mismatched secrets")


def bench_concurrency(users_list: Sequence[int], cfg: HarnessConfig = HarnessConfig(),
                      window_s: float = 5.0) -> list[ConcurrencyResult]:
    """Run ``users`` threads doing full handshakes for ``window_s`` seconds per level.

    Latencies are per handshake as seen by a worker (ms); throughput is total
    completed handshakes over the wall-clock span from start barrier to last join.
    """
    users_list = list(users_list)
    if not users_list or any(u < 1 for u in users_list):
        raise InvalidParameterError("users must be positive integers")
    if users_list != sorted(users_list):
        raise InvalidParameterError("users list must be ascending")
    kem = HybridKEM()
    # warm the code paths once outside any window
    for _ in range(min(cfg.warmup, 20)):
        full_handshake(kem)

    results = []
    for users in users_list:
        latencies: list[list[float]] = [[] for _ in range(users)]
        counts = [0] * users
        failures: list[tuple[int, str]] = []
        start = threading.Barrier(users + 1)
        deadline = [0.0]

        def worker(idx: int):
            lat = latencies[idx]
            perf = time.perf_counter
            try:
                start.wait()
                end = deadline[0]
                while perf() < end:
                    t0 = perf()
                    full_handshake(kem)
                    lat.append((perf() - t0) * 1000.0)
                    counts[idx] += 1
            except BaseException:
                failures.append((idx, traceback.format_exc()))

        threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(users)]
        old_stack = threading.stack_size()
        try:
            threading.stack_size(512 * 1024)
        except (ValueError, RuntimeError):
            pass
        try:
            for th in threads:
                th.start()
        finally:
            threading.stack_size(old_stack)
        deadline[0] = time.perf_counter() + window_s
        t_start = time.perf_counter()
        start.wait()
        for th in threads:
            th.join()
        wall = time.perf_counter() - t_start
        if failures:
            idx, tb = failures[0]
            raise RuntimeError(f"{len(failures)} of {users} workers failed; worker {idx}:\n{tb}")
        all_lat = np.concatenate([np.asarray(x) for x in latencies if x]) if any(latencies) else np.array([])
        total = sum(counts)
        if all_lat.size == 0:
            raise RuntimeError(f"no handshakes completed at {users} users in {window_s}s")
        mean = float(np.mean(all_lat))
        std = float(np.std(all_lat, ddof=1)) if all_lat.size > 1 else 0.0
        results.append(ConcurrencyResult(
            users=users,
            median_latency=float(np.median(all_lat)),
            p95=float(np.percentile(all_lat, 95)),
            throughput=total / wall,
            cov=std / mean * 100.0,
            total_ops=total,
            worker_ops=list(counts),
            wall_seconds=wall,
        ))
        # release per-level latency lists before the next level
        del latencies
    return results


def handshake_latency_warning(median_us: float, bound_us: float = 2000.0) -> str | None:
    if median_us < bound_us:
        return None
    msg = (f"full hybrid handshake median {median_us:.1f} us exceeds {bound_us:.0f} us; "
           f"env: {_env()}")
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    print(msg, file=sys.stderr)
    return msg
