"""Detection-error trade-off curves and the detection-cost function.

Decisions accept when score >= threshold. The curve holds one operating
point per distinct score plus a reject-all terminal point, so the
accept-all and reject-all baselines are always present.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri


@dataclass(frozen=True)
class DcfParams:
    v_miss: float = 1.0
    v_fa: float = 1.0
    p_true: float = 0.5

    def __post_init__(self):
        if not (self.v_miss > 0 and self.v_fa > 0):
            raise ValueError("costs must be positive")
        if not 0.0 < self.p_true < 1.0:
            raise ValueError("p_true must be in (0, 1)")

    @property
    def p_false(self) -> float:
        return 1.0 - self.p_true


@dataclass
class DetCurve:
    thresholds: np.ndarray
    p_miss: np.ndarray
    p_fa: np.ndarray
    n_target: int
    n_nontarget: int


def det_curve(target_scores, nontarget_scores) -> DetCurve:
    """Empirical DET curve over all distinct score thresholds."""
    t = np.sort(np.asarray(target_scores, dtype=np.float64))
    n = np.sort(np.asarray(nontarget_scores, dtype=np.float64))
    if len(t) == 0 or len(n) == 0:
        raise ValueError("need both target and non-target scores")
    thresholds = np.unique(np.concatenate([t, n, [np.inf]]))
    p_miss = np.searchsorted(t, thresholds, side="left") / len(t)
    p_fa = (len(n) - np.searchsorted(n, thresholds, side="left")) / len(n)
    return DetCurve(thresholds, p_miss, p_fa, len(t), len(n))


def dcf(p_miss: float, p_fa: float, params: DcfParams) -> float:
    """Prior- and cost-weighted error rate."""
    return (params.v_miss * p_miss * params.p_true
            + params.v_fa * p_fa * params.p_false)


def min_dcf(curve: DetCurve, params: DcfParams):
    """Minimum DCF over the curve; ties broken toward lower P_fa.

    Returns (value, threshold, p_miss, p_fa).
    """
    values = (params.v_miss * curve.p_miss * params.p_true
              + params.v_fa * curve.p_fa * params.p_false)
    order = np.lexsort((curve.p_fa, values))
    i = order[0]
    return (float(values[i]), float(curve.thresholds[i]),
            float(curve.p_miss[i]), float(curve.p_fa[i]))


def eer(curve: DetCurve) -> float:
    """Equal error rate, linearly interpolated at the P_miss = P_fa crossing."""
    diff = curve.p_miss - curve.p_fa
    if diff[0] >= 0.0:
        return float(0.5 * (curve.p_miss[0] + curve.p_fa[0]))
    idx = np.nonzero(diff >= 0.0)[0]
    if len(idx) == 0:
        return float(0.5 * (curve.p_miss[-1] + curve.p_fa[-1]))
    i = idx[0]
    m1, f1 = curve.p_miss[i - 1], curve.p_fa[i - 1]
    m2, f2 = curve.p_miss[i], curve.p_fa[i]
    denom = (f1 - m1) - (f2 - m2)
    if abs(denom) < 1e-30:
        return float(0.5 * (m2 + f2))
    t = (f1 - m1) / denom
    return float(m1 + t * (m2 - m1))


def probit(p: float, p_clip: float = 1e-4) -> float:
    """Inverse standard-normal CDF, clipped away from 0 and 1 for plotting."""
    return float(ndtri(np.clip(p, p_clip, 1.0 - p_clip)))


_TICKS = [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4, 0.6]


def _det_svg(curve: DetCurve, params: DcfParams) -> str:
    size, margin = 480, 60
    lo, hi = probit(0.0005), probit(0.6)
    span = hi - lo

    def sx(p):
        return margin + (probit(p, 5e-4) - lo) / span * (size - 2 * margin)

    def sy(p):
        return size - margin - (probit(p, 5e-4) - lo) / span * (size - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{size - 2 * margin}" '
        f'height="{size - 2 * margin}" fill="none" stroke="black"/>',
    ]
    for tick in _TICKS:
        x, y = sx(tick), sy(tick)
        parts.append(f'<line x1="{x:.1f}" y1="{size - margin}" x2="{x:.1f}" '
                     f'y2="{size - margin + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.1f}" y="{size - margin + 18}" '
                     f'font-size="10" text-anchor="middle">{tick * 100:g}</text>')
        parts.append(f'<line x1="{margin - 5}" y1="{y:.1f}" x2="{margin}" '
                     f'y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{margin - 8}" y="{y + 3:.1f}" font-size="10" '
                     f'text-anchor="end">{tick * 100:g}</text>')
    parts.append(f'<text x="{size / 2}" y="{size - 15}" font-size="12" '
                 f'text-anchor="middle">False alarm probability (%)</text>')
    parts.append(f'<text x="15" y="{size / 2}" font-size="12" '
                 f'text-anchor="middle" transform="rotate(-90 15 {size / 2})">'
                 f'Miss probability (%)</text>')
    pts = " ".join(f"{sx(f):.2f},{sy(m):.2f}"
                   for m, f in zip(curve.p_miss, curve.p_fa))
    parts.append(f'<polyline points="{pts}" fill="none" stroke="blue"/>')
    value, _, pm, pf = min_dcf(curve, params)
    parts.append(f'<circle cx="{sx(pf):.2f}" cy="{sy(pm):.2f}" r="5" '
                 f'fill="none" stroke="red" stroke-width="2"/>')
    parts.append(f'<text x="{size / 2}" y="{margin - 10}" font-size="11" '
                 f'text-anchor="middle">min DCF = {value:.4f}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def export_det(curve: DetCurve, params: DcfParams, path_base):
    """Write <base>.csv with per-threshold rates and <base>.svg with the
    normal-deviate DET plot (min-DCF point circled)."""
    csv_path = f"{path_base}.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["threshold", "p_miss", "p_fa", "dcf"])
        for t, m, fa in zip(curve.thresholds, curve.p_miss, curve.p_fa):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(fa)),
                        repr(dcf(m, fa, params))])
    svg_path = f"{path_base}.svg"
    with open(svg_path, "w") as f:
        f.write(_det_svg(curve, params))
    return csv_path, svg_path
