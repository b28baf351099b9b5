"""Confusion-matrix accounting, encoding-dimension sweeps and report rendering.

"normal" is the positive class throughout.
"""

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, ParseError

REPORT_FORMAT = "ganfault-report"
REPORT_VERSION = 1
CONVENTIONS = ("equal", "empirical")
RATE_NAMES = ("TPR", "TNR", "FPR", "FNR", "ACC", "PPV", "NPV", "FDR", "FOR")


def _ratio(num, den):
    return num / den if den > 0 else None


@dataclass(frozen=True)
class ConfusionReport:
    """Raw counts plus derived rates.

    ``convention="equal"`` computes ACC/PPV/NPV/FDR/FOR as if both classes
    were equally frequent (from TPR and TNR alone); ``"empirical"`` uses
    the observed counts. Undefined rates are ``None``.
    """

    TP: int
    FP: int
    FN: int
    TN: int
    convention: str = "equal"
    name: str = ""

    def __post_init__(self):
        if min(self.TP, self.FP, self.FN, self.TN) < 0:
            raise DomainError("counts must be nonnegative")
        if self.convention not in CONVENTIONS:
            raise DomainError(f"convention must be one of {CONVENTIONS}")

    @classmethod
    def from_rates(cls, tpr, tnr, n_per_class=10_000, name=""):
        """Counts reproducing the given per-class rates on equal class sizes."""
        tp = int(round(tpr * n_per_class))
        tn = int(round(tnr * n_per_class))
        return cls(tp, n_per_class - tn, n_per_class - tp, tn, "equal", name)

    @property
    def positives(self):
        return self.TP + self.FN

    @property
    def negatives(self):
        return self.TN + self.FP

    @property
    def rates(self):
        tpr = _ratio(self.TP, self.positives)
        tnr = _ratio(self.TN, self.negatives)
        fpr = _ratio(self.FP, self.negatives)
        fnr = _ratio(self.FN, self.positives)
        if self.convention == "empirical":
            acc = _ratio(self.TP + self.TN, self.positives + self.negatives)
            ppv = _ratio(self.TP, self.TP + self.FP)
            npv = _ratio(self.TN, self.TN + self.FN)
        else:
            if tpr is None or tnr is None:
                acc = ppv = npv = None
            else:
                acc = 0.5 * (tpr + tnr)
                ppv = _ratio(tpr, tpr + fpr)
                npv = _ratio(tnr, tnr + fnr)
        fdr = None if ppv is None else 1.0 - ppv
        fo = None if npv is None else 1.0 - npv
        return dict(zip(RATE_NAMES, (tpr, tnr, fpr, fnr, acc, ppv, npv, fdr, fo)))

    def __getattr__(self, item):
        if item in RATE_NAMES:
            return self.rates[item]
        raise AttributeError(item)

    def row_normalized(self):
        """Percent table by true class: ``[[normal->normal, normal->fault], [fault->normal, fault->fault]]``."""
        rows = []
        for a, b in ((self.TP, self.FN), (self.FP, self.TN)):
            tot = a + b
            rows.append([100.0 * a / tot, 100.0 * b / tot] if tot else [None, None])
        return rows

    def to_dict(self):
        return {
            "name": self.name,
            "convention": self.convention,
            "counts": {"TP": self.TP, "FP": self.FP, "FN": self.FN, "TN": self.TN},
            "rates": self.rates,
        }

    @classmethod
    def from_dict(cls, d):
        c = d["counts"]
        return cls(int(c["TP"]), int(c["FP"]), int(c["FN"]), int(c["TN"]),
                   d.get("convention", "equal"), d.get("name", ""))


def confusion_from_predictions(truth, predicted, convention="equal", name=""):
    """Tally binary labels (``"normal"`` / ``"fault"``; ``"fault:*"`` counts as fault)."""
    truth = list(truth)
    predicted = list(predicted)
    if len(truth) != len(predicted):
        raise DomainError(f"length mismatch: {len(truth)} truth vs {len(predicted)} predicted")

    def norm(lab):
        lab = str(lab)
        if lab == "normal":
            return True
        if lab == "fault" or lab.startswith("fault:"):
            return False
        raise DomainError(f"unknown label {lab!r}")

    t = np.array([norm(v) for v in truth], dtype=bool)
    p = np.array([norm(v) for v in predicted], dtype=bool)
    return ConfusionReport(
        TP=int(np.sum(t & p)), FP=int(np.sum(~t & p)),
        FN=int(np.sum(t & ~p)), TN=int(np.sum(~t & ~p)),
        convention=convention, name=name,
    )


@dataclass
class SweepRow:
    encoding_dim: int
    fault_tpr: float
    normal_tpr: float
    recon_error: float
    per_seed: list = field(default_factory=list)


def encoding_dim_sweep(benchmark, dims, seeds, **model_params):
    """Train one detector per ``(dim, seed)`` and average per dim.

    ``benchmark`` is a callable ``seed -> (train_windows, test_windows)``
    (see :func:`ganfault.experiment.make_benchmark`). Returns one
    :class:`SweepRow` per dim, in the given order.
    """
    from .experiment import evaluate_detector

    if not seeds:
        raise DomainError("need at least one seed")
    rows = []
    for dim in dims:
        per_seed = []
        for seed in seeds:
            train, test = benchmark(seed)
            if not 0 < dim < train.X.shape[1]:
                raise DomainError(f"encoding dim {dim} outside (0, {train.X.shape[1]})")
            try:
                res = evaluate_detector(train, test, encoding_dim=dim, random_state=seed,
                                        **model_params)
            except Exception as exc:
                raise type(exc)(f"dim={dim}, seed={seed}: {exc}") from exc
            per_seed.append(res)
        rows.append(SweepRow(
            encoding_dim=int(dim),
            fault_tpr=float(np.mean([r.report.TNR for r in per_seed])),
            normal_tpr=float(np.mean([r.report.TPR for r in per_seed])),
            recon_error=float(np.mean([r.final_recon for r in per_seed])),
            per_seed=[{"seed": s, "fault_tpr": r.report.TNR, "normal_tpr": r.report.TPR,
                       "recon_error": r.final_recon, "first_recon": r.first_recon}
                      for s, r in zip(seeds, per_seed)],
        ))
    return rows


# -- rendering --------------------------------------------------------------

def _pct(v):
    return "undefined" if v is None else f"{100.0 * v:.2f}%"


def _render_text(reports, sweep):
    lines = []
    for rep in reports:
        rows = rep.row_normalized()
        title = rep.name or "confusion matrix"
        lines.append(f"{title}  (rows: true class, row-normalized)")
        lines.append(f"{'':>8} {'normal':>9} {'fault':>9} {'total':>8}")
        for label, row in zip(("normal", "fault"), rows):
            if row[0] is None:
                lines.append(f"{label:>8} {'-':>9} {'-':>9} {'-':>8}")
            else:
                lines.append(f"{label:>8} {row[0]:>8.2f}% {row[1]:>8.2f}% {100:>7.2f}%")
        lines.append(f"counts: TP={rep.TP} FN={rep.FN} FP={rep.FP} TN={rep.TN}")
        lines.append("  ".join(f"{k}={_pct(v)}" for k, v in rep.rates.items())
                     + f"  [{rep.convention} priors]")
        lines.append("")
    if sweep:
        lines.append(f"{'dim':>5} {'fault TPR':>10} {'normal TPR':>11} {'recon':>10}")
        for r in sweep:
            lines.append(f"{r.encoding_dim:>5} {100 * r.fault_tpr:>9.2f}% "
                         f"{100 * r.normal_tpr:>10.2f}% {r.recon_error:>10.5f}")
    return "\n".join(lines).rstrip() + "\n"


def _render_structured(reports, sweep):
    doc = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "reports": [r.to_dict() for r in reports],
        "sweep": [
            {"encoding_dim": r.encoding_dim, "fault_tpr": r.fault_tpr,
             "normal_tpr": r.normal_tpr, "recon_error": r.recon_error, "per_seed": r.per_seed}
            for r in sweep
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_structured(text):
    """Inverse of the structured renderer: ``(reports, sweep_rows)``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from None
    if doc.get("format") != REPORT_FORMAT:
        raise ParseError("not a report document")
    if doc.get("version") != REPORT_VERSION:
        raise ParseError(f"unsupported report version {doc.get('version')!r}")
    reports = [ConfusionReport.from_dict(d) for d in doc["reports"]]
    sweep = [SweepRow(r["encoding_dim"], r["fault_tpr"], r["normal_tpr"], r["recon_error"],
                      r.get("per_seed", [])) for r in doc.get("sweep", [])]
    return reports, sweep


def _render_svg(reports, sweep, width=480, height=320):
    if not sweep:
        raise DomainError("svg-plot needs sweep rows")
    pad = 40
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", version="1.1",
                     width=str(width), height=str(height))
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    dims = [r.encoding_dim for r in sweep]
    lo, hi = min(dims), max(dims)
    span = (hi - lo) or 1

    def px(dim):
        return pad + (dim - lo) / span * (width - 2 * pad)

    series = {
        "fault TPR": ([r.fault_tpr for r in sweep], "#c0392b"),
        "reconstruction error": ([r.recon_error for r in sweep], "#2471a3"),
    }
    for i, (label, (vals, colour)) in enumerate(series.items()):
        vmax = max(max(vals), 1e-12)
        pts = " ".join(
            f"{px(d):.2f},{height - pad - v / vmax * (height - 2 * pad):.2f}"
            for d, v in zip(dims, vals)
        )
        ET.SubElement(svg, "polyline", points=pts, fill="none", stroke=colour,
                      attrib={"stroke-width": "2", "data-metric": label})
        txt = ET.SubElement(svg, "text", x=str(pad), y=str(16 + 14 * i), fill=colour,
                            attrib={"font-size": "12"})
        txt.text = f"{label} (max {vmax:.4g})"
    ET.SubElement(svg, "line", x1=str(pad), y1=str(height - pad), x2=str(width - pad),
                  y2=str(height - pad), stroke="black")
    for d in dims:
        t = ET.SubElement(svg, "text", x=f"{px(d):.2f}", y=str(height - pad + 16),
                          attrib={"font-size": "11", "text-anchor": "middle"})
        t.text = str(d)
    return ET.tostring(svg, encoding="unicode") + "\n"


def render_report(reports=(), fmt="text", sweep=()):
    reports = list(reports)
    sweep = list(sweep)
    if not reports and not sweep:
        raise DomainError("nothing to render")
    if fmt == "text":
        return _render_text(reports, sweep)
    if fmt == "structured":
        return _render_structured(reports, sweep)
    if fmt == "svg-plot":
        return _render_svg(reports, sweep)
    raise DomainError(f"unsupported format {fmt!r}; use text, structured or svg-plot")
