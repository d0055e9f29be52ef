"""Run outputs for humans and machines: a score table and token-highlight pages.

The table mirrors the usual explainer-benchmark layout (one row per method,
F1 with its confidence interval first) and is written as both JSON and CSV.
The HTML pages are fully static: one page per evaluated example showing the
gold rationale next to each method's predicted mask, words highlighted.
"""

from __future__ import annotations

import csv
import html
import json
from pathlib import Path
from typing import Mapping, Sequence

from .baseline_adapter import Explanation
from .harness import merge_rationales
from .metrics import EvalReport
from .trace import FORMAT_VERSION, AttentionTrace

_PAGE_STYLE = """
body { font-family: sans-serif; margin: 2em; }
table { border-collapse: collapse; }
th, td { border: 1px solid #ccc; padding: 0.4em 0.8em; text-align: left; }
th { background: #f0f0f0; }
.word { padding: 0.1em 0.25em; margin: 0 0.1em; border-radius: 3px; }
.hit { background: #ffd54d; }
.absent { color: #999; font-style: italic; }
"""


def _word_texts(trace: AttentionTrace) -> list[str]:
    words = [""] * trace.num_words
    for token, w in zip(trace.tokens, trace.word_ids):
        if w is None:
            continue
        piece = token[2:] if token.startswith("##") else token
        words[w] += piece
    return words


def _highlight_row(words: Sequence[str], mask: Sequence[int]) -> str:
    spans = []
    for word, bit in zip(words, mask):
        cls = "word hit" if bit else "word"
        spans.append(f'<span class="{cls}">{html.escape(word)}</span>')
    return " ".join(spans)


def render_report(
    reports: Sequence[EvalReport],
    traces: Sequence[AttentionTrace],
    explanations: Mapping[str, Mapping[str, Explanation]],
    out_dir: str | Path,
    merge_policy: str = "majority",
) -> None:
    """Write reports/results_table.{json,csv} and html/ under ``out_dir``."""
    out = Path(out_dir)
    reports_dir = out / "reports"
    html_dir = out / "html"
    reports_dir.mkdir(parents=True, exist_ok=True)
    html_dir.mkdir(exist_ok=True)

    _write_table(reports, reports_dir)
    methods = [r.method_id for r in reports]
    for trace in traces:
        _write_example_page(trace, methods, explanations, merge_policy, html_dir)
    _write_index(reports, traces, html_dir)


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def _write_table(reports: Sequence[EvalReport], reports_dir: Path) -> None:
    rows = []
    for r in reports:
        half = (r.f1_ci_high - r.f1_ci_low) / 2.0
        rows.append(
            {
                "method_id": r.method_id,
                "dataset_id": r.dataset_id,
                "f1": r.f1,
                "f1_ci_low": r.f1_ci_low,
                "f1_ci_high": r.f1_ci_high,
                "f1_display": f"{r.f1:.3f} ± {half:.3f}",
                "precision": r.precision,
                "recall": r.recall,
                "auroc": r.auroc,
                "aupr": r.aupr,
                "n_examples": r.n_examples,
                "n_words": r.n_words,
            }
        )
    table = {"format_version": FORMAT_VERSION, "rows": rows}
    (reports_dir / "results_table.json").write_text(
        json.dumps(table, indent=2) + "\n", encoding="utf-8"
    )
    with open(reports_dir / "results_table.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "method_id",
                "dataset_id",
                "f1",
                "f1_ci_low",
                "f1_ci_high",
                "precision",
                "recall",
                "auroc",
                "aupr",
                "n_examples",
                "n_words",
            ]
        )
        for r in reports:
            writer.writerow(
                [
                    r.method_id,
                    r.dataset_id,
                    _fmt(r.f1),
                    _fmt(r.f1_ci_low),
                    _fmt(r.f1_ci_high),
                    _fmt(r.precision),
                    _fmt(r.recall),
                    _fmt(r.auroc),
                    _fmt(r.aupr),
                    r.n_examples,
                    r.n_words,
                ]
            )


def _write_example_page(
    trace: AttentionTrace,
    methods: Sequence[str],
    explanations: Mapping[str, Mapping[str, Explanation]],
    merge_policy: str,
    html_dir: Path,
) -> None:
    words = _word_texts(trace)
    gold_mask = merge_rationales(trace, merge_policy).word_mask
    rows = [f"<tr><th>gold</th><td>{_highlight_row(words, gold_mask)}</td></tr>"]
    for method in methods:
        expl = explanations.get(method, {}).get(trace.example_id)
        if expl is None:
            cell = '<td class="absent">absent</td>'
        else:
            cell = f"<td>{_highlight_row(words, expl.word_mask)}</td>"
        rows.append(f"<tr><th>{html.escape(method)}</th>{cell}</tr>")
    page = (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'>"
        f"<title>{html.escape(trace.example_id)}</title>"
        f"<style>{_PAGE_STYLE}</style></head><body>"
        f"<h1>{html.escape(trace.example_id)}</h1>"
        f"<p>dataset: {html.escape(trace.dataset_id)} | gold label: {trace.label_gold} "
        f"| predicted: {trace.label_pred}</p>"
        f"<table>{''.join(rows)}</table>"
        "</body></html>\n"
    )
    (html_dir / f"{trace.example_id}.html").write_text(page, encoding="utf-8")


def _write_index(
    reports: Sequence[EvalReport], traces: Sequence[AttentionTrace], html_dir: Path
) -> None:
    table_rows = []
    for r in reports:
        half = (r.f1_ci_high - r.f1_ci_low) / 2.0
        table_rows.append(
            f"<tr><td>{html.escape(r.method_id)}</td><td>{r.f1:.3f} &plusmn; {half:.3f}</td>"
            f"<td>{_fmt(r.precision)}</td><td>{_fmt(r.recall)}</td>"
            f"<td>{_fmt(r.auroc)}</td><td>{_fmt(r.aupr)}</td></tr>"
        )
    links = [
        f'<li><a href="{html.escape(t.example_id)}.html">{html.escape(t.example_id)}</a></li>'
        for t in traces
    ]
    dataset = reports[0].dataset_id if reports else ""
    page = (
        "<!DOCTYPE html>\n<html><head><meta charset='utf-8'><title>results</title>"
        f"<style>{_PAGE_STYLE}</style></head><body>"
        f"<h1>Results: {html.escape(dataset)}</h1>"
        "<table><tr><th>method</th><th>F1 &plusmn; CI</th><th>P</th><th>R</th>"
        "<th>AUROC</th><th>AUPR</th></tr>"
        f"{''.join(table_rows)}</table>"
        f"<h2>Examples</h2><ul>{''.join(links)}</ul>"
        "</body></html>\n"
    )
    (html_dir / "index.html").write_text(page, encoding="utf-8")
