"""Matplotlib figures written next to evaluation reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# No timestamps or version strings, so reruns are byte-identical.
PNG_METADATA = {"Software": None}

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 100,
}

COLORS = {"easy": "#1b9e77", "difficult": "#d95f02", "overall": "#404040"}


def _save(fig, path):
    fig.savefig(path, metadata=PNG_METADATA)
    plt.close(fig)
    return path


def r2_curve(report, path):
    """R2 against tau for the easy split, the difficult split and all pairs."""
    taus = np.array(report.taus)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for label in ("easy", "difficult", None):
            means = [report.r2_mean(k, label) for k in range(len(taus))]
            if any(m is None for m in means):
                continue
            name = label or "overall"
            ax.plot(taus, means, marker="o", color=COLORS[name], label=name,
                    linestyle="-" if label else "--")
        ax.set_xlabel(r"correspondence error threshold $\tau$ (px)")
        ax.set_ylabel(r"$R_2$")
        ax.set_ylim(-0.02, 1.02)
        ax.set_xticks(taus)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        return _save(fig, path)


def mae_bars(report, path):
    rows = report.evaluated
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * len(rows) + 1.5), 3.0))
        x = np.arange(len(rows))
        ax.bar(x, [r.mae for r in rows], color=[COLORS.get(r.difficulty, "#888888") for r in rows])
        ax.set_xticks(x)
        ax.set_xticklabels([r.pair_id for r in rows], rotation=90, fontsize=6)
        ax.set_ylabel("MAE (px)")
        handles = [plt.Rectangle((0, 0), 1, 1, color=COLORS[k]) for k in ("easy", "difficult")]
        ax.legend(handles, ["easy", "difficult"], frameon=False)
        fig.tight_layout()
        return _save(fig, path)


def report_figures(report, out_prefix):
    return [
        r2_curve(report, out_prefix + "_r2.png"),
        mae_bars(report, out_prefix + "_mae.png"),
    ]


def energy_trace(trace, path):
    """Energy after each refinement pass, one line per pyramid level."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 3.0))
        for lv in trace:
            ax.plot(np.arange(len(lv.energies)), lv.energies, marker=".",
                    label=f"level {lv.level} ({lv.grid_a[0]}x{lv.grid_a[1]})")
        ax.set_xlabel("pass")
        ax.set_ylabel("energy")
        ax.legend(frameon=False)
        fig.tight_layout()
        return _save(fig, path)
