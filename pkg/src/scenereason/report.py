"""Accuracy report rendering: text summary, TSV block, and a bar-chart figure."""

from __future__ import annotations

from pathlib import Path

from .evaluation import EvalReport


def render_report_text(report: EvalReport, protocol: str) -> str:
    lines = [
        f"protocol: {protocol}",
        f"total: {report.total}",
        f"correct: {report.correct}",
        f"accuracy: {report.accuracy * 100.0:.2f}%",
    ]
    if report.per_type:
        lines.append("")
        lines.append("question type breakdown:")
        width = max(len(tag) for tag in report.per_type)
        for tag in sorted(report.per_type):
            bucket = report.per_type[tag]
            lines.append(
                f"  {tag.ljust(width)}  {bucket.correct}/{bucket.total}"
                f"  {bucket.accuracy * 100.0:.2f}%"
            )
    return "\n".join(lines) + "\n"


def render_report_tsv(report: EvalReport) -> str:
    rows = ["question_type\ttotal\tcorrect\taccuracy"]
    rows.append(f"overall\t{report.total}\t{report.correct}\t{report.accuracy!r}")
    for tag in sorted(report.per_type):
        bucket = report.per_type[tag]
        rows.append(f"{tag}\t{bucket.total}\t{bucket.correct}\t{bucket.accuracy!r}")
    return "\n".join(rows) + "\n"


def render_report_figure(report: EvalReport, path: Path, protocol: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    tags = sorted(report.per_type)
    values = [report.per_type[tag].accuracy * 100.0 for tag in tags]
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(tags) + 1.5))
    ax.barh(range(len(tags)), values, color="#4878a8")
    ax.set_yticks(range(len(tags)))
    ax.set_yticklabels(tags)
    ax.invert_yaxis()
    ax.set_xlim(0, 100)
    ax.set_xlabel("accuracy (%)")
    ax.axvline(report.accuracy * 100.0, color="#404040", linestyle="--", linewidth=1,
               label=f"overall {report.accuracy * 100.0:.1f}%")
    ax.legend(loc="lower right")
    ax.set_title(f"accuracy by question type ({protocol} match)")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_report_files(
    report: EvalReport,
    out_dir: str | Path,
    stem: str = "report",
    protocol: str = "soft",
    figure: bool = True,
) -> list[Path]:
    """Write <stem>.txt, <stem>.tsv, and (with per-type data) <stem>.png."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    txt = out_dir / f"{stem}.txt"
    txt.write_text(render_report_text(report, protocol), encoding="utf-8")
    written.append(txt)
    tsv = out_dir / f"{stem}.tsv"
    tsv.write_text(render_report_tsv(report), encoding="utf-8")
    written.append(tsv)
    if figure and report.per_type:
        png = out_dir / f"{stem}.png"
        render_report_figure(report, png, protocol)
        written.append(png)
    return written
