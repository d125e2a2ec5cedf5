"""SVG plots of trace channels.  Output is byte-stable for identical input."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import ValidationError  # noqa: E402
from .sim import TRACE_COLUMNS  # noqa: E402

UNITS = {
    "v": "m/s", "T_w": "N*m", "T_e": "N*m", "w_e": "rad/s", "T_g": "N*m", "w_g": "rad/s",
    "T_m0": "N*m", "T_m1": "N*m", "T_m2": "N*m", "w_m0": "rad/s", "w_m1": "rad/s", "w_m2": "rad/s",
    "P_m0": "W", "P_m1": "W", "P_m2": "W", "P_gen": "W", "P_bus": "W", "P_bat": "W", "T_bF": "N*m",
    "fuel_g": "g", "HC_g": "g", "CO_g": "g", "NOx_g": "g", "PM_g": "g",
}
PLOTTABLE = tuple(c for c in TRACE_COLUMNS if c != "t")


def _style():
    return {"svg.hashsalt": "erevsim", "svg.fonttype": "none", "path.simplify": False}


def plot_channels(data, channels, out_dir, stem="trace"):
    """Write one SVG per channel against time; returns the written paths."""
    if not data or "t" not in data or np.asarray(data["t"]).size == 0:
        raise ValidationError("empty trace")
    bad = [c for c in channels if c not in PLOTTABLE or c not in data]
    if bad:
        raise ValidationError(f"unknown channel(s) {', '.join(bad)}; valid: {', '.join(PLOTTABLE)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    with matplotlib.rc_context(_style()):
        for ch in channels:
            fig, ax = plt.subplots(figsize=(8, 3))
            ax.plot(np.asarray(data["t"]), np.asarray(data[ch]), lw=0.8)
            if ch == "soc" and "soc_ref" in data:
                ax.plot(np.asarray(data["t"]), np.asarray(data["soc_ref"]), lw=0.8, ls="--")
            unit = UNITS.get(ch)
            ax.set_xlabel("t [s]")
            ax.set_ylabel(f"{ch} [{unit}]" if unit else ch)
            ax.grid(True, lw=0.3)
            fig.tight_layout()
            path = out / f"{stem}_{ch}.svg"
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(path)
    return paths
