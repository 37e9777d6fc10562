"""BER curve rendering. Plots are produced from CSV files only, never from
live state, so they can be regenerated offline at any time."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import read_ber_csv

_MARKERS = ("o", "s", "^", "v", "D", "x", "*", "P", "<", ">")


def render_ber_plot(csv_path, out_path, title: str | None = None) -> Path:
    """Render one BER-vs-Eb/N0 plot (log BER axis) from a BerCurve CSV.

    One curve per (detector, K) pair, except the exhaustive reference,
    which is drawn once (at the lowest evaluated K) as the common baseline.
    """
    points = read_ber_csv(csv_path)
    if not points:
        raise ValueError(f"no data rows in {csv_path}")
    seed = points[0].seed
    groups: dict[tuple[str, float], list] = {}
    for p in points:
        groups.setdefault((p.detector, p.k_factor), []).append(p)
    mlsd_ks = sorted(k for (det, k) in groups if det == "mlsd")
    if mlsd_ks:
        for k in mlsd_ks[1:]:
            del groups[("mlsd", k)]

    # Deterministic SVG output: fixed hash salt, no embedded date.
    plt.rcParams["svg.hashsalt"] = "osgd-mimo"
    fig, ax = plt.subplots(figsize=(7.0, 5.0))
    for i, ((det, k), pts) in enumerate(sorted(groups.items())):
        pts = sorted(pts, key=lambda p: p.ebn0_db)
        label = "mlsd" if det == "mlsd" else f"{det}, K={k:g}"
        ax.semilogy(
            [p.ebn0_db for p in pts],
            [max(p.ber, 0.5 / p.bits_sent) for p in pts],
            marker=_MARKERS[i % len(_MARKERS)],
            label=label,
        )
    ax.set_xlabel(r"$E_b/N_0$ (dB)")
    ax.set_ylabel("BER")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.4)
    ax.legend(fontsize=8)
    fig.text(0.99, 0.01, f"seed {seed}", ha="right", fontsize=7, color="gray")
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return out_path
