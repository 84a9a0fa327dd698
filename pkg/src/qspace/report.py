"""Delimited and graphical rendering for the command-line reports.

Figures are written straight to files through the Agg backend so the
commands stay usable on headless machines.
"""

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def write_csv(path: str, header: list, rows: list):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def render_width_chart(path: str, reports: list, expected: dict):
    """Bar chart of block size against achievable live width per code."""
    names = [r.code_name for r in reports]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.bar([i - 0.2 for i in x], [r.n for r in reports], width=0.4,
           label="block size n", color="#b0c4d8")
    ax.bar([i + 0.2 for i in x], [r.optimal_qubits for r in reports],
           width=0.4, label="live qubits needed", color="#2d6a8f")
    for i, r in enumerate(reports):
        want = expected.get(r.code_name)
        if want is not None:
            ax.plot([i - 0.05, i + 0.45], [want, want], "k--", linewidth=1)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names)
    ax.set_ylabel("qubits")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_chain_profile(path: str, report):
    """Profile of the coset chain: recorded bits grow level by level while
    the per-outcome support shrinks, meeting at the achievable width."""
    levels = [0] + [lv["level"] for lv in report.levels]
    recorded = [0] + [lv["level"] for lv in report.levels]
    support = [report.n] + [
        lv["rank"].bit_length() - 1 for lv in report.levels
    ]
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.step(levels, recorded, where="post", label="recorded bits")
    ax.step(levels, support, where="post", label="support qubits per outcome")
    ax.axhline(report.optimal_qubits, linestyle="--", color="gray",
               label=f"live width {report.optimal_qubits}")
    ax.set_xlabel("chain level")
    ax.set_ylabel("qubits / bits")
    ax.set_title(f"{report.code_name}: [[{report.n},{report.k}]]")
    ax.set_xticks(levels)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
