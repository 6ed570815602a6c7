"""Figures for the evaluation CSVs, rendered to files with the Agg backend."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (4.5, 3.0),
    "savefig.dpi": 150,
}


def plot_sweep(rows, path):
    """Central-angle std per diffuseness bin."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if rows:
            centre = np.array([(r["psi_lo"] + r["psi_hi"]) / 2 for r in rows])
            ax.plot(centre, [r["std_deg"] for r in rows], "o-", label="std")
            ax.plot(centre, [r["mean_deg"] for r in rows], "s--", label="mean", alpha=0.7)
            ax.step(centre, [r["half_step_deg"] for r in rows], where="mid", color="grey",
                    label="half grid step")
            ax.legend()
        ax.set_xlim(0, 1)
        ax.set_xlabel("estimated diffuseness")
        ax.set_ylabel("central angle (deg)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_metrics(report, path):
    """Per-order decoded power and per-band DOA error of a codec run."""
    with plt.rc_context(STYLE):
        fig, (a0, a1) = plt.subplots(1, 2, figsize=(7.5, 3.0))
        orders = np.arange(len(report.order_power_profile))
        with np.errstate(divide="ignore"):
            a0.plot(orders, 10 * np.log10(np.maximum(report.order_power_profile, 1e-12)), "o-", label="decoded")
            a0.plot(orders, 10 * np.log10(1.0 / (2 * orders + 1)), "k:", label="1/(2l+1)")
        a0.set_xticks(orders)
        a0.set_ylim(bottom=-20)
        a0.set_xlabel("order l")
        a0.set_ylabel("channel power re W (dB)")
        a0.legend()
        bands = np.arange(len(report.doa_mean_deg))
        a1.bar(bands, report.doa_mean_deg, yerr=report.doa_std_deg, capsize=3)
        a1.set_xticks(bands)
        a1.set_xlabel("band")
        a1.set_ylabel("DOA error (deg)")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
