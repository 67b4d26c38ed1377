"""Report emission for CLI report paths: CSV tables plus matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_timing_report(out_dir, frames: list[str],
                        millis: list[float]) -> list[Path]:
    """Per-frame render times as CSV and a bar figure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "render_times.csv"
    _write_csv(csv_path, ["frame", "milliseconds"],
               [[name, f"{ms:.3f}"] for name, ms in zip(frames, millis)])

    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.bar(range(len(millis)), millis, color="#4878a8")
    if millis:
        mean = sum(millis) / len(millis)
        ax.axhline(mean, color="#a84848", linewidth=1.0,
                   label=f"mean {mean:.1f} ms")
        ax.legend(loc="upper right")
    ax.set_xlabel("frame")
    ax.set_ylabel("milliseconds")
    ax.set_title("render time per frame")
    fig.tight_layout()
    fig_path = out / "render_times.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return [csv_path, fig_path]


def write_psnr_report(out_dir, frames: list[str], values: list[float],
                      threshold: float | None = None) -> list[Path]:
    """Per-frame PSNR as CSV and a line figure with mean and threshold."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "psnr.csv"
    _write_csv(csv_path, ["frame", "psnr_db"],
               [[name, f"{v:.4f}"] for name, v in zip(frames, values)])

    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(range(len(values)), values, marker="o", markersize=3,
            color="#4878a8")
    if values:
        mean = sum(values) / len(values)
        ax.axhline(mean, color="#48a868", linewidth=1.0,
                   label=f"mean {mean:.2f} dB")
        ax.legend(loc="lower right")
    if threshold is not None:
        ax.axhline(threshold, color="#a84848", linewidth=1.0, linestyle="--")
    ax.set_xlabel("frame")
    ax.set_ylabel("PSNR (dB)")
    ax.set_title("frame PSNR")
    fig.tight_layout()
    fig_path = out / "psnr.png"
    fig.savefig(fig_path, dpi=110)
    plt.close(fig)
    return [csv_path, fig_path]
