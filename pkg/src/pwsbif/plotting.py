"""Static SVG plots of bifurcation loci."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLES = ("double", "dashed", "solid")
KIND_STYLE = {"hopf": "double", "grazing": "dashed", "saddle-node": "solid"}
KIND_COLOR = {"hopf": "tab:red", "grazing": "tab:blue", "saddle-node": "tab:green"}


@dataclass
class Series:
    label: str
    x: list
    y: list
    style: str = "solid"
    color: str = "black"

    def __post_init__(self):
        if self.style not in STYLES:
            raise ValueError(f"style must be one of {STYLES}")
        if len(self.x) != len(self.y):
            raise ValueError("x and y lengths differ")


@dataclass
class PlotSpec:
    xlabel: str
    ylabel: str
    series: list
    path: str
    markers: list = field(default_factory=list)  # (x, y, label)
    title: str = ""

    def __post_init__(self):
        if not self.series:
            raise ValueError("a plot needs at least one series")


def _draw(ax, s: Series):
    if s.style == "double":
        # a thick stroke with a thin white core reads as two parallel lines
        ax.plot(s.x, s.y, color=s.color, lw=3.6, solid_capstyle="butt", label=s.label)
        ax.plot(s.x, s.y, color="white", lw=1.4, solid_capstyle="butt")
    elif s.style == "dashed":
        ax.plot(s.x, s.y, color=s.color, lw=1.5, ls="--", label=s.label)
    else:
        ax.plot(s.x, s.y, color=s.color, lw=1.5, label=s.label)


def render_svg(spec: PlotSpec):
    """Write ``spec`` to ``spec.path``; SVG output is byte-identical across runs.

    Any other extension is handed to matplotlib as is.
    """
    with plt.rc_context({"svg.hashsalt": "pwsbif", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for s in spec.series:
            _draw(ax, s)
        for x, y, label in spec.markers:
            ax.plot([x], [y], marker="o", ms=6, color="black", ls="none", label=label)
            ax.annotate(label, (x, y), textcoords="offset points", xytext=(6, 6))
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        if str(spec.path).endswith(".svg"):
            fig.savefig(spec.path, format="svg", metadata={"Date": None})
        else:
            fig.savefig(spec.path)
        plt.close(fig)
    return spec.path


def bifset_spec(curves, path, cusp=None, xlabel="alpha", ylabel="beta"):
    """Plot spec for raw-frame curves, styled by kind.

    ``curves`` is a list of ``(label, BifurcationCurve)`` pairs; the curve's
    ``mu`` and ``eta`` columns hold the two frame parameters.
    """
    series = []
    for label, c in curves:
        if not c.samples:
            continue
        series.append(Series(label, list(c.mu), list(c.eta), KIND_STYLE[c.kind], KIND_COLOR[c.kind]))
    markers = [(cusp[0], cusp[1], "cusp")] if cusp is not None else []
    return PlotSpec(xlabel, ylabel, series, path, markers)


__all__ = ["Series", "PlotSpec", "render_svg", "bifset_spec", "KIND_STYLE"]
