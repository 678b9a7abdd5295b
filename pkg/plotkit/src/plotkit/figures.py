"""Render one figure per statistic with all runs overlaid.

Output is deterministic: fixed style, fixed SVG hash salt, no timestamps, so
re-rendering identical inputs reproduces identical bytes.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PANELS = {
    "kinetic_energy": "E(t)",
    "enstrophy": "Ens(t)",
    "taylor_microscale": "Taylor microscale",
    "turbulence_intensity": "I(t)",
    "k_avg": "k(t)",
}

_LINESTYLES = ["-", "--", "-.", ":"]
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"]


class PanelNameError(ValueError):
    """Unknown statistic name; message lists the valid ones."""

    def __init__(self, name):
        valid = ", ".join(sorted(PANELS))
        super().__init__(f"unknown statistic {name!r}; valid names: {valid}")


def render_statistics_figure(bundles, panel, out_path, fmt="png"):
    """Write one labeled overlay figure; returns the path or None if no data.

    Empty bundles are skipped; if every bundle is empty no file is emitted.
    """
    if panel not in PANELS:
        raise PanelNameError(panel)
    drawn = [b for b in bundles if not b.empty]
    if not drawn:
        return None
    matplotlib.rcParams["svg.hashsalt"] = "plotkit"

    fig, ax = plt.subplots(figsize=(7.0, 4.4), dpi=130)
    for i, bundle in enumerate(drawn):
        ax.plot(bundle.series("t"), bundle.series(panel),
                _LINESTYLES[i % len(_LINESTYLES)],
                color=_COLORS[i % len(_COLORS)],
                linewidth=1.4, label=bundle.label)
    ax.set_xlabel("t")
    ax.set_ylabel(PANELS[panel])
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    caption = " | ".join(
        f"{b.label}: {b.config_hash[:8] or 'no-hash'}" for b in drawn)
    fig.text(0.01, 0.005, f"config {caption}", fontsize=6, color="#555555")
    fig.tight_layout(rect=(0, 0.02, 1, 1))
    fig.savefig(out_path, format=fmt, metadata=_clean_metadata(fmt))
    plt.close(fig)
    return out_path


def _clean_metadata(fmt):
    if fmt == "svg":
        return {"Date": None}
    return {}
