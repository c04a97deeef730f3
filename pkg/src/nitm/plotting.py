"""Report figures.  Uses the object-oriented matplotlib API so no global backend state is touched."""

import math

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

__all__ = ["nu_label", "plot_test_error_curves"]


def nu_label(nu):
    if math.isinf(nu):
        return "inf"
    return f"{nu:g}"


def plot_test_error_curves(result, path):
    """Test error against q', one line per nu.

    Each line carries the gid ``nu=<value>`` so the SVG can be inspected
    programmatically.
    """
    grid = result.grid
    q_values = list(grid.q_prime_values)
    fig = Figure(figsize=(6.4, 4.2))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot(1, 1, 1)
    for nu in grid.nu_values:
        errors = [result.cell(nu, q).test_error for q in q_values]
        (line,) = ax.plot(q_values, errors, marker="o", markersize=3, label=f"ν = {nu_label(nu)}")
        line.set_gid(f"nu={nu_label(nu)}")
    ax.set_xticks(q_values)
    ax.set_xticklabels([f"{q:g}" for q in q_values])
    ax.set_xlabel("q'")
    ax.set_ylabel("test error")
    ax.set_title(result.dataset)
    ax.legend(fontsize="small", ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    # fixed metadata keeps the file byte-identical across runs
    with matplotlib.rc_context({"svg.hashsalt": "nitm"}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    return path
