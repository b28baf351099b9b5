"""Synthetic closed-loop plant, fault injection, windowing and CSV I/O.

The plant is a discrete state-space recursion

    x[k+1] = A x[k] + B (u[k] - u_mid) + E d[k]
    y[k]   = C x[k] + y_nominal + gamma * tanh(C x[k])

closed by one PI loop per actuator. Output channels that are not paired
with an actuator are monitored only, much like an outdoor-air sensor.
"""

import configparser
import csv
import logging
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ParseError, SimulationError
from .numerics import rng_stream

logger = logging.getLogger(__name__)

FAULT_KINDS = ("sensor-bias", "setpoint-offset", "stuck-actuator")
NORMAL = "normal"
_LABEL_RE = re.compile(r"^(normal|fault:[A-Za-z0-9_.\-]+)$")


@dataclass(frozen=True)
class FaultSpec:
    """One fault active on steps ``start <= k < end``.

    ``channel`` indexes outputs for sensor-bias and setpoint-offset, and
    actuators for stuck-actuator. ``offset`` is the bias / setpoint shift,
    or the stuck level as a fraction of the actuator range.
    """

    kind: str
    channel: int
    offset: float
    start: int
    end: int
    name: str = ""

    @property
    def label(self):
        return "fault:" + (self.name or f"{self.kind.replace('-', '_')}_{self.channel}")

    def active(self, k):
        return self.start <= k < self.end

    def validate(self, system, horizon):
        if self.kind not in FAULT_KINDS:
            raise DomainError(f"unknown fault kind {self.kind!r}; expected one of {FAULT_KINDS}")
        limit = system.m if self.kind == "stuck-actuator" else system.q
        if not 0 <= self.channel < limit:
            raise DomainError(f"fault channel {self.channel} out of range [0, {limit})")
        if self.kind == "setpoint-offset" and self.channel not in system.controlled:
            raise DomainError(f"output channel {self.channel} has no setpoint")
        if self.kind == "stuck-actuator" and not 0.0 <= self.offset <= 1.0:
            raise DomainError("stuck level fraction must lie in [0, 1]")
        if not (0 <= self.start < self.end <= horizon):
            raise DomainError(
                f"activation window [{self.start}, {self.end}) outside horizon {horizon}"
            )
        if not _LABEL_RE.match(self.label):
            raise DomainError(f"invalid fault label {self.label!r}")


@dataclass
class ClosedLoopSystem:
    """Plant matrices, PI controller and excitation settings.

    Use :meth:`default` to get the structured plant used throughout the
    package; the fields can be overridden afterwards.
    """

    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    C: np.ndarray
    y_nominal: np.ndarray
    controlled: tuple
    kp: np.ndarray
    ki: np.ndarray
    setpoint_amplitude: float = 1.5
    setpoint_period: int = 720
    disturbance_amplitude: np.ndarray = None
    disturbance_period: int = 1440
    disturbance_noise: float = 0.3
    measurement_noise: float = 0.05
    output_nonlinearity: float = 0.5
    u_min: float = 0.0
    u_max: float = 1.0
    envelope: float = 1e3
    sample_period_s: float = 60.0

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.E.shape[1]

    @property
    def q(self):
        return self.C.shape[0]

    @classmethod
    def default(cls, n=4, m=2, p=2, q=3, sample_period_s=60.0):
        if min(n, m, p, q) < 1:
            raise DomainError("all dimensions must be positive")
        if m > q:
            raise DomainError("need at least as many outputs as actuators (one PI loop each)")
        # lower-triangular dynamics: disturbances enter state 0 and
        # propagate down the chain; eigenvalues are the diagonal, hence stable
        A = np.diag(np.linspace(0.97, 0.9, n))
        for i in range(1, n):
            A[i, i - 1] = 0.04
        E = np.zeros((n, p))
        for j in range(p):
            E[j % n, j] = 0.03 if j == 0 else 0.02
        B = np.zeros((n, m))
        for i in range(m):
            B[(n - m + i) % n, i] = -0.8 if i % 2 == 0 else 0.6
            if n > 1:
                B[(n - m + i - 1) % n, i] += 0.1
        C = np.zeros((q, n))
        for j in range(q):
            col = 0 if q == 1 else round(j * (n - 1) / (q - 1))
            C[j, col] = 1.0
        y_nominal = np.full(q, 20.0)
        y_nominal[0] = 10.0
        controlled = tuple(range(q - m, q))

        dc = C @ np.linalg.solve(np.eye(n) - A, B)
        kp = np.zeros(m)
        ki = np.zeros(m)
        for i, ch in enumerate(controlled):
            g = dc[ch, i]
            if abs(g) < 1e-6:
                g = 1.0
            kp[i] = 2.0 / g
            ki[i] = 0.1 / g
        amp = np.full(p, 1.0)
        amp[0] = 8.0
        return cls(
            A=A, B=B, E=E, C=C, y_nominal=y_nominal, controlled=controlled,
            kp=kp, ki=ki, disturbance_amplitude=amp, sample_period_s=sample_period_s,
        )

    def validate(self):
        n, m, p, q = self.n, self.m, self.p, self.q
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.E.shape[0] != n:
            raise DomainError("plant matrices have inconsistent state dimension")
        if self.C.shape[1] != n or len(self.y_nominal) != q:
            raise DomainError("output map has inconsistent dimensions")
        if len(self.controlled) != m or len(self.kp) != m or len(self.ki) != m:
            raise DomainError("need exactly one controlled output and PI gain pair per actuator")
        if len(set(self.controlled)) != m or any(not 0 <= c < q for c in self.controlled):
            raise DomainError("controlled channels must be distinct valid outputs")
        if self.u_max <= self.u_min:
            raise DomainError("u_max must exceed u_min")
        if self.sample_period_s <= 0:
            raise DomainError("sample period must be positive")


@dataclass
class Normalization:
    """Per-channel min/max over normal records, channel order ``u0.., y0..``."""

    lo: np.ndarray
    hi: np.ndarray

    def apply(self, values):
        span = self.hi - self.lo
        const = span <= 0
        out = (values - self.lo) / np.where(const, 1.0, span)
        out[..., const] = 0.5
        return out

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["lo"], dtype=float), np.asarray(d["hi"], dtype=float))


@dataclass
class Dataset:
    """Time-ordered records of ``(t, u, y, label)``."""

    t: np.ndarray
    u: np.ndarray
    y: np.ndarray
    labels: list

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.y = np.atleast_2d(np.asarray(self.y, dtype=float))
        self.labels = list(self.labels)
        k = len(self.t)
        if self.u.shape[0] != k or self.y.shape[0] != k or len(self.labels) != k:
            raise DomainError("records have inconsistent lengths")
        for lab in self.labels:
            if not _LABEL_RE.match(lab):
                raise DomainError(f"invalid label {lab!r}")

    def __len__(self):
        return len(self.t)

    @property
    def m(self):
        return self.u.shape[1]

    @property
    def q(self):
        return self.y.shape[1]

    @property
    def channels(self):
        return np.hstack([self.u, self.y])

    @property
    def is_normal(self):
        return np.array([lab == NORMAL for lab in self.labels])

    def normalization(self):
        """Min/max statistics over the normal records only."""
        mask = self.is_normal
        if not mask.any():
            raise DomainError("dataset has no normal records")
        ch = self.channels[mask]
        return Normalization(ch.min(axis=0), ch.max(axis=0))

    def subset(self, mask):
        mask = np.asarray(mask)
        return Dataset(self.t[mask], self.u[mask], self.y[mask],
                       [lab for lab, keep in zip(self.labels, mask) if keep])


@dataclass
class Windows:
    """Flattened, normalized windows: row ``i`` of ``X`` holds ``W`` records
    of ``m + q`` channels each, oldest first."""

    X: np.ndarray
    labels: list
    norm: Normalization
    window: int
    stride: int
    warnings: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    @property
    def is_normal(self):
        return np.array([lab == NORMAL for lab in self.labels])

    @property
    def binary_labels(self):
        return ["normal" if lab == NORMAL else "fault" for lab in self.labels]


def _setpoint(system, k, ch_index):
    base = system.y_nominal[system.controlled[ch_index]]
    half = max(system.setpoint_period // 2, 1)
    sign = 1.0 if (k // half) % 2 == 0 else -1.0
    return base + sign * system.setpoint_amplitude


def simulate(system, horizon, faults=(), seed=0):
    """Run the closed loop for ``horizon`` steps and return labeled records.

    Records inside a fault's activation window carry that fault's label;
    overlapping faults are rejected so every record has a single label.
    """
    system.validate()
    if horizon < 1:
        raise DomainError("horizon must be at least 1")
    faults = list(faults)
    for f in faults:
        f.validate(system, horizon)
    for i, f in enumerate(faults):
        for g in faults[i + 1:]:
            if f.start < g.end and g.start < f.end:
                raise DomainError("fault activation windows overlap")

    rng = rng_stream(seed)
    n, m, p, q = system.n, system.m, system.p, system.q
    phase = rng.uniform(0.0, 2 * np.pi, size=p)
    x = np.zeros(n)
    integ = np.zeros(m)
    u_mid = 0.5 * (system.u_min + system.u_max)
    u_half = 0.5 * (system.u_max - system.u_min)
    amp = (np.ones(p) if system.disturbance_amplitude is None
           else np.asarray(system.disturbance_amplitude, dtype=float))
    # steady-state gain of each disturbance onto the state; the sinusoid
    # amplitude is expressed in output units rather than input units
    x_gain = np.linalg.solve(np.eye(n) - system.A, system.E)
    d_scale = 1.0 / np.maximum(np.abs(x_gain).max(axis=0), 1e-12)

    T = np.arange(horizon) * system.sample_period_s
    U = np.empty((horizon, m))
    Y = np.empty((horizon, q))
    labels = [NORMAL] * horizon

    for k in range(horizon):
        # draw every random number each step so faults never shift the stream
        w_d = rng.standard_normal(p)
        w_y = rng.standard_normal(q)
        active = [f for f in faults if f.active(k)]
        if active:
            labels[k] = active[0].label

        cx = system.C @ x
        y_true = cx + system.y_nominal + system.output_nonlinearity * np.tanh(cx)
        y_meas = y_true + system.measurement_noise * w_y
        sp_shift = np.zeros(m)
        for f in active:
            if f.kind == "sensor-bias":
                y_meas[f.channel] += f.offset
            elif f.kind == "setpoint-offset":
                sp_shift[system.controlled.index(f.channel)] += f.offset

        u = np.empty(m)
        for i, ch in enumerate(system.controlled):
            err = _setpoint(system, k, i) + sp_shift[i] - y_meas[ch]
            integ[i] = np.clip(integ[i] + err, -1e3, 1e3)
            v = system.kp[i] * err + system.ki[i] * integ[i]
            u[i] = u_mid + u_half * math.tanh(v)
        for f in active:
            if f.kind == "stuck-actuator":
                u[f.channel] = system.u_min + f.offset * (system.u_max - system.u_min)

        if not np.all(np.abs(y_meas) <= system.envelope):
            raise SimulationError(f"output left the envelope at step {k}", step=k)
        U[k] = u
        Y[k] = y_meas

        tt = 2 * np.pi * k / max(system.disturbance_period, 1)
        d = d_scale * (amp * np.sin(tt + phase) + system.disturbance_noise * w_d)
        x = system.A @ x + system.B @ (u - u_mid) + system.E @ d

    return Dataset(T, U, Y, labels)


def window_normalize(raw, window, stride=1, norm=None):
    """Cut ``raw`` into flattened windows scaled with normal-data min/max.

    Pass ``norm`` to reuse statistics fitted elsewhere (e.g. a model's).
    Faulty values outside the normal range are kept as-is, not clamped.
    A window is normal iff all its records are; otherwise it carries the
    single fault label present.
    """
    if window < 1 or stride < 1:
        raise DomainError("window and stride must be >= 1")
    if len(raw) < window:
        raise DomainError(f"need at least {window} records, got {len(raw)}")
    if norm is None:
        norm = raw.normalization()
    ch = raw.channels
    if ch.shape[1] != len(norm.lo):
        raise DomainError(
            f"dataset has {ch.shape[1]} channels, normalization expects {len(norm.lo)}"
        )
    warnings = []
    for i in np.flatnonzero(norm.hi - norm.lo <= 0):
        msg = f"channel {i} is constant in normal data; mapped to 0.5"
        logger.warning(msg)
        warnings.append(msg)
    scaled = norm.apply(ch)

    starts = range(0, len(raw) - window + 1, stride)
    X = np.stack([scaled[s:s + window].reshape(-1) for s in starts])
    labels = []
    for s in starts:
        faulty = {lab for lab in raw.labels[s:s + window] if lab != NORMAL}
        if len(faulty) > 1:
            raise DomainError(f"window starting at record {s} mixes faults {sorted(faulty)}")
        labels.append(faulty.pop() if faulty else NORMAL)
    return Windows(X, labels, norm, window, stride, warnings)


def save_dataset(ds, path):
    header = ["t"] + [f"u{i}" for i in range(ds.m)] + [f"y{i}" for i in range(ds.q)] + ["label"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(ds)):
            row = [repr(float(ds.t[k]))]
            row += [repr(float(v)) for v in ds.u[k]]
            row += [repr(float(v)) for v in ds.y[k]]
            row.append(ds.labels[k])
            w.writerow(row)


def load_dataset(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line=1) from None
        if len(header) < 3 or header[0] != "t" or header[-1] != "label":
            raise ParseError("header must be t,u0..,y0..,label", line=1)
        cols = header[1:-1]
        m = sum(1 for c in cols if c.startswith("u"))
        expected = [f"u{i}" for i in range(m)] + [f"y{i}" for i in range(len(cols) - m)]
        if cols != expected or len(cols) == m:
            raise ParseError(f"bad channel columns {cols}", line=1)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} columns, got {len(row)}", line=lineno)
            try:
                vals = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError("non-finite value", line=lineno)
            if not _LABEL_RE.match(row[-1]):
                raise ParseError(f"invalid label {row[-1]!r}", line=lineno)
            rows.append(vals)
            labels.append(row[-1])
    if not rows:
        raise ParseError("no records", line=2)
    arr = np.array(rows)
    return Dataset(arr[:, 0], arr[:, 1:1 + m], arr[:, 1 + m:], labels)


def read_config(path):
    """Parse a ``key = value`` plant/fault config file into a flat dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    with open(path) as fh:
        text = fh.read()
    try:
        parser.read_string("[plant]\n" + text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from None
    return dict(parser["plant"])


def system_from_config(cfg):
    """Build ``(system, horizon, faults, seed)`` from a config dict.

    Faults use ``fault.*`` keys, or numbered ``fault1.*``, ``fault2.*`` ...
    for several.
    """
    def geti(key, default):
        return int(cfg.get(key, default))

    known = {"n", "m", "p", "q", "horizon", "sample_period_s", "seed"}
    for key in cfg:
        if key not in known and not re.match(r"^fault\d*\.(kind|channel|offset|start|end|name)$", key):
            raise ParseError(f"unknown config key {key!r}")
    system = ClosedLoopSystem.default(
        n=geti("n", 4), m=geti("m", 2), p=geti("p", 2), q=geti("q", 3),
        sample_period_s=float(cfg.get("sample_period_s", 60.0)),
    )
    horizon = geti("horizon", 2880)
    prefixes = sorted({k.split(".")[0] for k in cfg if k.startswith("fault")})
    faults = []
    for pre in prefixes:
        try:
            faults.append(FaultSpec(
                kind=cfg[f"{pre}.kind"],
                channel=int(cfg[f"{pre}.channel"]),
                offset=float(cfg[f"{pre}.offset"]),
                start=int(cfg[f"{pre}.start"]),
                end=int(cfg[f"{pre}.end"]),
                name=cfg.get(f"{pre}.name", ""),
            ))
        except KeyError as exc:
            raise ParseError(f"fault {pre!r} is missing key {exc.args[0]!r}") from None
    return system, horizon, faults, geti("seed", 0)
