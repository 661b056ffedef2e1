"""Monte Carlo harness: BER sweeps, convergence traces, iteration studies.

Reproducibility contract: every trial owns a counter-based random stream
derived from (master seed, SNR index, trial index), and all aggregation is
order-independent, so results are byte-identical for any batch size. All
detectors inside one trial see the same channel, symbols and noise, which
makes BER comparisons paired. Wall-clock columns are the one exception to
byte-identical output; everything else is deterministic.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import batch
from .channel import ChannelInstance, get_constellation, trial_rng
from .discrete_bp import BpConfig, bp1_factor_graph, bp2_fully_connected, bp3_ring, hard_decide, soft_output
from .errors import CapacityError, ConfigError
from .exact import lmmse, map_marginals, ml_hard
from .gaussian_bp import GbpConfig, affine_ops, convergence_metric, fixed_point, gbp2g, gbp3g
from .pairwise import Topology, build_graph
from .polydiag import bidiagonalize, forward_backward_detect

DETECTORS = ("MAP", "ML", "LMMSE", "BP1", "BP2", "BP3", "FB", "GBP2G", "GBP3G")
LATTICE_DETECTORS = ("MAP", "ML", "BP1")
DEFAULT_ITERATIONS = {"BP1": 4, "BP2": 3, "BP3": 4, "FB": 4}


@dataclass(frozen=True)
class BerRecord:
    detector: str
    snr_db: float
    trials: int
    bit_errors: int
    ber: float
    ci95: float
    elapsed_s: float
    iterations: int | None = None


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulator run."""

    m: int = 4
    n: int = 4
    constellation: str = "QPSK"
    snr_db: tuple = (6.0, 8.0, 10.0, 12.0, 14.0)
    detectors: tuple = ("ML", "BP2", "BP3", "LMMSE")
    iterations: dict = field(default_factory=dict)
    trials: int = 10000
    target_errors: int | None = None
    max_trials: int | None = None
    seed: int = 0
    permutation: tuple | None = None
    out: str | None = None
    fmt: str = "csv"
    batch_size: int = 4096
    gbp_sweeps: int = 200
    channels: int = 20
    sweeps: int = 1000
    iter_list: tuple = (2, 3, 4, 6)

    def validate(self):
        if self.m < 1 or self.n < self.m:
            raise ConfigError(f"need N >= M >= 1, got M={self.m}, N={self.n}")
        if not self.snr_db:
            raise ConfigError("snr_db list must not be empty")
        if not self.detectors:
            raise ConfigError("detector list must not be empty")
        for d in self.detectors:
            if d not in DETECTORS:
                raise ConfigError(f"unknown detector {d!r}; choose from {', '.join(DETECTORS)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        for det, count in self.iterations.items():
            if det not in DETECTORS:
                raise ConfigError(f"iteration count for unknown detector {det!r}")
            if count < 1:
                raise ConfigError(f"iterations for {det} must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.fmt!r}")
        if self.permutation is not None and sorted(self.permutation) != list(range(self.m)):
            raise ConfigError("permutation must be a bijection on 0..M-1")
        get_constellation(self.constellation)
        return self

    def iteration_count(self, detector):
        return int(self.iterations.get(detector, DEFAULT_ITERATIONS.get(detector, 4)))

    def echo(self) -> str:
        items = []
        for key, value in sorted(asdict(self).items()):
            # batch_size is a parallelism knob with no effect on results, so
            # it stays out of the provenance line to keep outputs identical
            # across partitionings
            if value is None or key in ("out", "batch_size"):
                continue
            if isinstance(value, dict):
                value = ";".join(f"{k}:{v}" for k, v in sorted(value.items())) or "default"
            elif isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            items.append(f"{key}={value}")
        return " ".join(items)


# ---------------------------------------------------------------------------
# config file parsing

_LIST_KEYS = {"snr_db", "detectors", "permutation", "iter_list"}
_INT_KEYS = {"m", "n", "trials", "target_errors", "max_trials", "seed",
             "batch_size", "gbp_sweeps", "channels", "sweeps"}


def parse_config_text(text: str) -> dict:
    """Parse the flat key = value config format; '#' starts a comment."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key.startswith("iterations."):
            det = key.split(".", 1)[1].upper()
            if det not in DETECTORS:
                raise ConfigError(f"line {lineno}: unknown detector {det!r} in {key!r}")
            out.setdefault("iterations", {})[det] = _parse_scalar(key, value, lineno, int)
        elif key == "iterations":
            out["iterations"] = {d: _parse_scalar(key, value, lineno, int)
                                 for d in DEFAULT_ITERATIONS}
        elif key in _LIST_KEYS:
            out[key] = _parse_list(key, value, lineno)
        elif key in _INT_KEYS:
            out[key] = _parse_scalar(key, value, lineno, int)
        elif key in ("constellation", "fmt", "out"):
            out[key] = value
        elif key == "detector":
            out["detectors"] = _parse_list(key, value, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return out


def _parse_scalar(key, value, lineno, cast):
    try:
        return cast(value)
    except ValueError as exc:
        raise ConfigError(f"line {lineno}: field {key!r}: {exc}") from None


def _parse_list(key, value, lineno):
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if key == "snr_db":
        return tuple(_parse_scalar(key, p, lineno, float) for p in parts)
    if key in ("permutation", "iter_list"):
        return tuple(_parse_scalar(key, p, lineno, int) for p in parts)
    return tuple(p.upper() for p in parts)


def load_config(path=None, overrides=None) -> SimConfig:
    data: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            data.update(parse_config_text(fh.read()))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "iterations" and isinstance(value, int):
            merged = dict(data.get("iterations", {}))
            merged.update({d: value for d in DEFAULT_ITERATIONS})
            value = merged
        data[key] = value
    try:
        cfg = SimConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


# ---------------------------------------------------------------------------
# trial generation

def generate_batch(cfg: SimConfig, constellation, sigma2, snr_idx, start, count):
    """Draw ``count`` trials, one independent stream per (seed, snr, trial).

    Per-trial draw protocol (fixed for reproducibility): 2NM standard
    normals for the channel, M uniforms for the symbol indices, then 2N
    standard normals for the noise.
    """
    m, n = cfg.m, cfg.n
    H = np.empty((count, n, m), dtype=complex)
    idx = np.empty((count, m), dtype=np.int64)
    y = np.empty((count, n), dtype=complex)
    cum = np.cumsum(constellation.prior)
    scale = np.sqrt(sigma2 / 2.0)
    for b in range(count):
        g = trial_rng(cfg.seed, start + b, snr_idx)
        w = g.standard_normal(2 * n * m)
        H[b] = (w[: n * m] + 1j * w[n * m:]).reshape(n, m) / np.sqrt(2.0)
        u = g.random(m)
        idx[b] = np.minimum(np.searchsorted(cum, u, side="right"), constellation.size - 1)
        wn = g.standard_normal(2 * n)
        y[b] = H[b] @ constellation.points[idx[b]] + scale * (wn[:n] + 1j * wn[n:])
    return H, idx, y


def _detect_batch(detector, H, y, sigma2, constellation, cfg: SimConfig, cache):
    """Hard decisions (B, M) for one detector on one generated batch."""
    order = cfg.permutation

    def links():
        if "links" not in cache:
            cache["links"] = batch.link_tables(H, y, sigma2)
        return cache["links"]

    if detector == "LMMSE":
        xhat, _ = batch.lmmse_batch(H, y, sigma2)
        return constellation.slice_hard(xhat)
    if detector == "ML":
        return batch.ml_hard_batch(H, y, sigma2, constellation)
    if detector == "MAP":
        return np.argmax(batch.map_marginals_batch(H, y, sigma2, constellation), axis=2)
    if detector == "BP1":
        beliefs = batch.bp1_batch(H, y, sigma2, constellation, cfg.iteration_count("BP1"))
        return np.argmax(beliefs, axis=2)
    if detector == "BP2":
        beliefs = batch.bp2_batch(links(), constellation, cfg.iteration_count("BP2"))
        return np.argmax(beliefs, axis=2)
    if detector == "BP3":
        beliefs = batch.bp3_batch(links(), constellation, cfg.iteration_count("BP3"), order=order)
        return np.argmax(beliefs, axis=2)
    if detector == "FB":
        beliefs = batch.fb_batch(H, y, sigma2, constellation, cfg.iteration_count("FB"), order=order)
        return np.argmax(beliefs, axis=2)
    if detector == "GBP2G":
        return constellation.slice_hard(batch.gbp2g_batch(links(), cfg.gbp_sweeps))
    if detector == "GBP3G":
        return constellation.slice_hard(batch.gbp3g_batch(links(), cfg.gbp_sweeps, order=order))
    raise ConfigError(f"unknown detector {detector!r}")


def _check_capacity(cfg, constellation):
    if any(d in LATTICE_DETECTORS for d in cfg.detectors):
        if cfg.m * constellation.bits_per_symbol > 24:
            raise CapacityError(
                f"detectors {LATTICE_DETECTORS} need m*M <= 24 bits, "
                f"got {cfg.m * constellation.bits_per_symbol}"
            )


def _ci95(errors, n_bits):
    p = errors / n_bits
    p_floor = max(p, 0.5 / n_bits)  # continuity floor keeps zero-error CIs positive
    return 1.96 * np.sqrt(p_floor * (1.0 - p_floor) / n_bits)


# ---------------------------------------------------------------------------
# commands


def run_simulate(cfg: SimConfig):
    """BER per (detector, SNR); common random numbers across detectors."""
    constellation = get_constellation(cfg.constellation)
    _check_capacity(cfg, constellation)
    labels = constellation.bit_labels
    bits_per_trial = cfg.m * constellation.bits_per_symbol
    records = []
    for snr_idx, snr in enumerate(cfg.snr_db):
        sigma2 = 10.0 ** (-snr / 10.0)
        errors = {d: [] for d in cfg.detectors}
        elapsed = {d: 0.0 for d in cfg.detectors}
        hard_cap = cfg.max_trials or (cfg.trials if cfg.target_errors is None
                                      else 100 * cfg.trials)
        done = 0
        while done < hard_cap:
            count = min(cfg.batch_size, hard_cap - done)
            H, idx_true, y = generate_batch(cfg, constellation, sigma2, snr_idx, done, count)
            bits_true = labels[idx_true]
            cache: dict = {}
            for det in cfg.detectors:
                t0 = time.perf_counter()
                idx_hat = _detect_batch(det, H, y, sigma2, constellation, cfg, cache)
                elapsed[det] += time.perf_counter() - t0
                errors[det].append(np.sum(labels[idx_hat] != bits_true, axis=(1, 2)))
            done += count
            if _stopping_met(cfg, errors, done):
                break
        for det in cfg.detectors:
            per_trial = np.concatenate(errors[det])
            used = _trials_used(cfg, per_trial)
            n_err = int(per_trial[:used].sum())
            n_bits = used * bits_per_trial
            records.append(BerRecord(detector=det, snr_db=snr, trials=used,
                                     bit_errors=n_err, ber=n_err / n_bits,
                                     ci95=float(_ci95(n_err, n_bits)),
                                     elapsed_s=elapsed[det]))
    return records


def _trials_used(cfg, per_trial):
    """Stopping trial for one detector; independent of batch partitioning."""
    total = per_trial.shape[0]
    if cfg.target_errors is None:
        return min(cfg.trials, total)
    floor = min(cfg.trials, total)
    cum = np.cumsum(per_trial)
    reached = np.nonzero(cum >= cfg.target_errors)[0]
    if reached.size == 0:
        return total
    return max(floor, int(reached[0]) + 1)


def _stopping_met(cfg, errors, done):
    if cfg.target_errors is None:
        return done >= cfg.trials
    if done < cfg.trials:
        return False
    for chunks in errors.values():
        if sum(int(c.sum()) for c in chunks) < cfg.target_errors:
            return False
    return True


def run_iterstudy(cfg: SimConfig):
    """BER versus iteration count for the pairwise BP detectors.

    All iteration settings reuse identical channel and noise draws, so the
    comparison is paired.
    """
    bad = [d for d in cfg.detectors if d not in ("BP2", "BP3")]
    if bad:
        raise ConfigError(f"iterstudy supports BP2/BP3 only, got {bad}")
    constellation = get_constellation(cfg.constellation)
    labels = constellation.bit_labels
    bits_per_trial = cfg.m * constellation.bits_per_symbol
    records = []
    for snr_idx, snr in enumerate(cfg.snr_db):
        sigma2 = 10.0 ** (-snr / 10.0)
        err = {(d, k): 0 for d in cfg.detectors for k in cfg.iter_list}
        elapsed = {key: 0.0 for key in err}
        done = 0
        while done < cfg.trials:
            count = min(cfg.batch_size, cfg.trials - done)
            H, idx_true, y = generate_batch(cfg, constellation, sigma2, snr_idx, done, count)
            bits_true = labels[idx_true]
            tables = batch.link_tables(H, y, sigma2)
            for det in cfg.detectors:
                for k in cfg.iter_list:
                    t0 = time.perf_counter()
                    if det == "BP2":
                        beliefs = batch.bp2_batch(tables, constellation, k)
                    else:
                        beliefs = batch.bp3_batch(tables, constellation, k, order=cfg.permutation)
                    idx_hat = np.argmax(beliefs, axis=2)
                    elapsed[(det, k)] += time.perf_counter() - t0
                    err[(det, k)] += int(np.sum(labels[idx_hat] != bits_true))
            done += count
        n_bits = cfg.trials * bits_per_trial
        for det in cfg.detectors:
            for k in cfg.iter_list:
                records.append(BerRecord(detector=det, snr_db=snr, trials=cfg.trials,
                                         bit_errors=err[(det, k)],
                                         ber=err[(det, k)] / n_bits,
                                         ci95=float(_ci95(err[(det, k)], n_bits)),
                                         elapsed_s=elapsed[(det, k)],
                                         iterations=k))
    return records


@dataclass(frozen=True)
class ConvergenceRecord:
    channel_id: int
    snr_db: float
    detector: str
    n: int
    e_n: float
    d_n: float


def run_converge(cfg: SimConfig):
    """Per-channel convergence traces of the Gaussian schemes."""
    bad = [d for d in cfg.detectors if d not in ("GBP2G", "GBP3G")]
    if bad:
        raise ConfigError(f"converge supports GBP2G/GBP3G only, got {bad}")
    constellation = get_constellation(cfg.constellation)
    records = []
    gcfg = GbpConfig(max_sweeps=cfg.sweeps, tol=1e-13)
    for cid in range(cfg.channels):
        for snr_idx, snr in enumerate(cfg.snr_db):
            sigma2 = 10.0 ** (-snr / 10.0)
            # one independent stream per (channel id, SNR point), mirroring
            # the BER sweep's trial streams
            H, idx, y = generate_batch(cfg, constellation, sigma2, snr_idx, cid, 1)
            channel = ChannelInstance(H=H[0], sigma2=sigma2)
            x_true = constellation.points[idx[0]]
            ref = lmmse(channel, y[0])
            for det in cfg.detectors:
                if det == "GBP2G":
                    graph = build_graph(channel, y[0], Topology.FULLY_CONNECTED)
                    trace = gbp2g(graph, gcfg)
                else:
                    graph = build_graph(channel, y[0], Topology.RING, cfg.permutation)
                    trace = gbp3g(graph, gcfg)
                curves = convergence_metric(trace, x_true, ref.estimates, ref.mmse)
                for n in range(trace.n_sweeps):
                    records.append(ConvergenceRecord(channel_id=cid, snr_db=snr,
                                                     detector=det, n=n + 1,
                                                     e_n=float(curves.e[n]),
                                                     d_n=float(curves.d[n])))
    return records


def run_detect(cfg: SimConfig):
    """Single-instance diagnostic report, built on the reference detectors."""
    constellation = get_constellation(cfg.constellation)
    snr = cfg.snr_db[0]
    sigma2 = 10.0 ** (-snr / 10.0)
    H, idx, y = generate_batch(cfg, constellation, sigma2, 0, 0, 1)
    channel = ChannelInstance(H=H[0], sigma2=sigma2)
    y0 = y[0]
    report = {
        "snr_db": snr,
        "sigma2": sigma2,
        "H": _cplx(channel.H),
        "y": _cplx(y0),
        "tx_indices": idx[0].tolist(),
        "tx_bits": constellation.bits_for(idx[0]).tolist(),
        "detectors": {},
    }
    detectors = list(cfg.detectors)
    if cfg.m == 1:
        detectors = [d for d in detectors if d in ("MAP", "ML", "LMMSE", "BP1")]
    for det in detectors:
        entry = {}
        if det == "MAP":
            beliefs = map_marginals(channel, constellation, y0)
        elif det == "ML":
            hard = ml_hard(channel, constellation, y0)
            report["detectors"][det] = {"hard": hard.tolist(),
                                        "bits": constellation.bits_for(hard).tolist()}
            continue
        elif det == "LMMSE":
            res = lmmse(channel, y0)
            hard = constellation.slice_hard(res.estimates)
            report["detectors"][det] = {
                "estimates": _cplx(res.estimates), "mmse": res.mmse.tolist(),
                "hard": hard.tolist(), "bits": constellation.bits_for(hard).tolist()}
            continue
        elif det == "BP1":
            state = bp1_factor_graph(channel, constellation, y0,
                                     BpConfig(iterations=cfg.iteration_count("BP1")))
            beliefs = state.beliefs
        elif det == "BP2":
            graph = build_graph(channel, y0, Topology.FULLY_CONNECTED)
            beliefs = bp2_fully_connected(graph, constellation,
                                          BpConfig(iterations=cfg.iteration_count("BP2"))).beliefs
        elif det == "BP3":
            graph = build_graph(channel, y0, Topology.RING, cfg.permutation)
            beliefs = bp3_ring(graph, constellation,
                               BpConfig(iterations=cfg.iteration_count("BP3"))).beliefs
        elif det == "FB":
            bd = bidiagonalize(channel, cfg.permutation)
            beliefs = forward_backward_detect(bd, constellation, y0,
                                              BpConfig(iterations=cfg.iteration_count("FB"))).beliefs
        elif det in ("GBP2G", "GBP3G"):
            if det == "GBP2G":
                graph = build_graph(channel, y0, Topology.FULLY_CONNECTED)
                trace = gbp2g(graph, GbpConfig(max_sweeps=cfg.sweeps))
            else:
                graph = build_graph(channel, y0, Topology.RING, cfg.permutation)
                trace = gbp3g(graph, GbpConfig(max_sweeps=cfg.sweeps))
            means = trace.means[-1]
            hard = constellation.slice_hard(means)
            report["detectors"][det] = {
                "means": _cplx(means), "variances": trace.variances[-1].tolist(),
                "sweeps": trace.n_sweeps, "converged": bool(trace.converged),
                "hard": hard.tolist(), "bits": constellation.bits_for(hard).tolist()}
            continue
        else:
            raise ConfigError(f"unknown detector {det!r}")
        hard = hard_decide(beliefs)
        entry.update({"beliefs": [row.tolist() for row in beliefs],
                      "llr": [row.tolist() for row in soft_output(beliefs, constellation)],
                      "hard": hard.tolist(), "bits": constellation.bits_for(hard).tolist()})
        report["detectors"][det] = entry

    if cfg.m >= 2:
        graph = build_graph(channel, y0, Topology.FULLY_CONNECTED)
        report["links"] = [
            {"target": j, "known": i, "y_prime": _c(l.y_prime), "a_diag": l.a_jj,
             "a_cross": _c(l.a_ji), "sigma2_cond": l.sigma2_cond,
             "u": _c(l.u), "v": _c(l.v)}
            for (j, i), l in sorted(graph.links.items())
        ]
        ring = build_graph(channel, y0, Topology.RING, cfg.permutation)
        ops = affine_ops(ring)
        report["contraction"] = {
            "f_V": [_c(ops.compose_forward(r).slope) for r in range(cfg.m)],
            "b_V": [_c(ops.compose_backward(r).slope) for r in range(cfg.m)],
            "bound": ops.contraction_bound(),
        }
        fp = fixed_point(ring)
        report["ring_fixed_point"] = {"forward": _cplx(fp.forward), "backward": _cplx(fp.backward)}
    return report


def _c(z):
    return [float(np.real(z)), float(np.imag(z))]


def _cplx(arr):
    arr = np.asarray(arr)
    return [[_c(v) for v in row] for row in arr] if arr.ndim == 2 else [_c(v) for v in arr]


# ---------------------------------------------------------------------------
# output


def format_report(report: dict) -> str:
    lines = [f"instance at SNR {report['snr_db']} dB (sigma2 = {report['sigma2']:.6g})"]
    lines.append("H (re, im):")
    for row in report["H"]:
        lines.append("  " + "  ".join(f"({re:+.4f},{im:+.4f})" for re, im in row))
    lines.append("y: " + "  ".join(f"({re:+.4f},{im:+.4f})" for re, im in report["y"]))
    lines.append(f"tx indices: {report['tx_indices']}  bits: {report['tx_bits']}")
    for det, entry in report["detectors"].items():
        lines.append(f"[{det}] hard={entry['hard']} bits={entry['bits']}")
        if "beliefs" in entry:
            for j, row in enumerate(entry["beliefs"]):
                lines.append(f"  belief[{j}] " + " ".join(f"{p:.6f}" for p in row)
                             + f"  (sum={sum(row):.12f})")
        if "means" in entry:
            lines.append(f"  means={entry['means']} sweeps={entry['sweeps']} converged={entry['converged']}")
        if "estimates" in entry:
            lines.append(f"  estimates={entry['estimates']} mmse={entry['mmse']}")
    if "contraction" in report:
        lines.append(f"ring contraction f_V={report['contraction']['f_V']}")
        lines.append(f"ring contraction b_V={report['contraction']['b_V']} "
                     f"bound={report['contraction']['bound']:.6f}")
    return "\n".join(lines)


_CSV_FIELDS = {
    "simulate": ("detector", "snr_db", "trials", "bit_errors", "ber", "ci95", "elapsed_s"),
    "iterstudy": ("detector", "iterations", "snr_db", "trials", "bit_errors", "ber", "ci95", "elapsed_s"),
    "converge": ("channel_id", "snr_db", "detector", "n", "e_n", "d_n"),
}


def _fmt_value(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def render_csv(command: str, cfg: SimConfig, records) -> str:
    fields = _CSV_FIELDS[command]
    buf = io.StringIO()
    buf.write(f"# mimobp {command} {cfg.echo()}\n")
    buf.write(",".join(fields) + "\n")
    for rec in records:
        row = asdict(rec)
        buf.write(",".join(_fmt_value(row[f]) for f in fields) + "\n")
    return buf.getvalue()


def render_json(command: str, cfg: SimConfig, records) -> str:
    payload = {
        "command": command,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items() if k != "out"},
        "records": records if isinstance(records, dict) else [asdict(r) for r in records],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def render(command: str, cfg: SimConfig, records) -> str:
    if cfg.fmt == "json" or command == "detect":
        return render_json(command, cfg, records)
    return render_csv(command, cfg, records)
