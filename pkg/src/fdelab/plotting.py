"""PNG figures for emitted plot data (matplotlib, headless backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


def _log_ok(values) -> bool:
    return all(v > 0 for v in values)


def render_figures(series: dict, profiles: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (sid, name, variant), pts in series.items():
        if len(pts) < 2:
            continue
        x = [p[0] for p in pts]
        lhs = [p[1] for p in pts]
        rhs = [p[2] for p in pts]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(x, lhs, "o-", label="lhs")
        ax.plot(x, rhs, "s--", label="rhs")
        if _log_ok(lhs + rhs):
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_title(f"{sid}: {name} ({variant})", fontsize=9)
        ax.legend()
        fig.tight_layout()
        path = out_dir / _safe(f"{sid}__{name}__{variant}.png")
        fig.savefig(path, dpi=90)
        plt.close(fig)
        written.append(path)
    for sid, samples in profiles.items():
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for s in samples:
            ax.plot(s.r, s.u, label=f"t={s.t:.3g}")
        ax.set_xlabel("r")
        ax.set_ylabel("u")
        ax.set_title(f"{sid}: radial profiles", fontsize=9)
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / _safe(f"{sid}__profiles.png")
        fig.savefig(path, dpi=90)
        plt.close(fig)
        written.append(path)
    return written
