"""Image quality and artifact metrics (float images, peak value 1.0)."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

PEAK = 1.0


def _as3d(a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    return a


def _pair(a, b):
    a = _as3d(getattr(a, "data", a))
    b = _as3d(getattr(b, "data", b))
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    return np.mean((a - b) ** 2, axis=(0, 1))


def rmse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(a, b) -> np.ndarray:
    """PSNR per channel in dB; identical images give ``inf``."""
    m = mse(a, b)
    with np.errstate(divide="ignore"):
        return np.where(m == 0, np.inf, 10.0 * np.log10(PEAK ** 2 / np.where(m == 0, 1.0, m)))


def mean_psnr(a, b) -> float:
    """PSNR of the mean squared error over all channels."""
    m = float(np.mean(mse(a, b)))
    return math.inf if m == 0 else 10.0 * math.log10(PEAK ** 2 / m)


def ssim(a, b, window=8, k1=0.01, k2=0.03) -> np.ndarray:
    """Mean SSIM per channel over every ``window`` x ``window`` patch (uniform weights)."""
    a, b = _pair(a, b)
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(f"image {a.shape[:2]} smaller than SSIM window {window}")
    c1 = (k1 * PEAK) ** 2
    c2 = (k2 * PEAK) ** 2
    out = []
    for c in range(a.shape[2]):
        wa = sliding_window_view(a[:, :, c], (window, window))
        wb = sliding_window_view(b[:, :, c], (window, window))
        mu_a = wa.mean(axis=(-1, -2))
        mu_b = wb.mean(axis=(-1, -2))
        var_a = wa.var(axis=(-1, -2))
        var_b = wb.var(axis=(-1, -2))
        cov = ((wa - mu_a[..., None, None]) * (wb - mu_b[..., None, None])).mean(axis=(-1, -2))
        num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
        den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
        # the index is bounded by 1 in magnitude; clip rounding overshoot
        out.append(float(np.mean(np.clip(num / den, -1.0, 1.0))))
    return np.array(out)


def line_artifact_score(img, axis=0) -> np.ndarray:
    """Worst line-mean deviation relative to the global mean, per channel.

    With the default ``axis=0`` the lines are image columns (means taken down
    each column). ``axis=1`` scores rows instead. An all-zero channel
    scores 0.
    """
    a = _as3d(getattr(img, "data", img))
    line_means = a.mean(axis=axis)  # (lines, C)
    # lines have equal length, so this is the global mean; a constant image scores exactly 0
    g = line_means.mean(axis=0)
    safe = np.where(g == 0, 1.0, g)
    score = np.max(np.abs(line_means - g[None, :]), axis=0) / np.abs(safe)
    return np.where(g == 0, 0.0, score)


@dataclass
class QualityReport:
    psnr: list
    psnr_mean: float
    rmse: float
    ssim: list
    line_artifact_score: list
    digests: dict = field(default_factory=dict)
    label: str = ""

    @classmethod
    def compare(cls, recon, truth, label="", **digests):
        r = getattr(recon, "data", recon)
        t = getattr(truth, "data", truth)
        win = min(8, np.shape(r)[0], np.shape(r)[1])
        return cls(
            psnr=[float(v) for v in psnr(r, t)],
            psnr_mean=mean_psnr(r, t),
            rmse=rmse(r, t),
            ssim=[float(v) for v in ssim(r, t, window=win)],
            line_artifact_score=[float(v) for v in line_artifact_score(r)],
            digests=dict(digests),
            label=label,
        )

    def _fields(self):
        row = {"label": self.label, "psnr_mean": repr(self.psnr_mean), "rmse": repr(self.rmse)}
        for c, v in enumerate(self.psnr):
            row[f"psnr_{c}"] = repr(v)
        for c, v in enumerate(self.ssim):
            row[f"ssim_{c}"] = repr(v)
        for c, v in enumerate(self.line_artifact_score):
            row[f"line_artifact_{c}"] = repr(v)
        row.update(sorted(self.digests.items()))
        return row

    def csv_header(self):
        return list(self._fields())

    def csv_row(self):
        return list(self._fields().values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        w.writerow(self.csv_row())
        return buf.getvalue()

    def __str__(self):
        lines = [f"quality report{' (' + self.label + ')' if self.label else ''}",
                 f"  PSNR      : {self.psnr_mean:.2f} dB  per channel "
                 + ", ".join(f"{v:.2f}" for v in self.psnr),
                 f"  RMSE      : {self.rmse:.6g}",
                 "  SSIM      : " + ", ".join(f"{v:.4f}" for v in self.ssim),
                 "  line score: " + ", ".join(f"{v:.4g}" for v in self.line_artifact_score)]
        lines += [f"  {k}: {v}" for k, v in sorted(self.digests.items())]
        return "\n".join(lines)


def reports_to_csv(reports, extra_columns=None) -> str:
    """Several reports as one CSV table; ``extra_columns`` is a list of dicts, one per report."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    extra_columns = extra_columns or [{} for _ in reports]
    for k, (rep, extra) in enumerate(zip(reports, extra_columns)):
        if k == 0:
            w.writerow(list(extra) + rep.csv_header())
        w.writerow([str(v) for v in extra.values()] + rep.csv_row())
    return buf.getvalue()
