from __future__ import annotations

import io
import logging
from typing import Optional, Sequence, Tuple

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .roc import RocCurve, auc

logger = logging.getLogger(__name__)

# fixed ids and no timestamp so the same curves always give the same bytes
SVG_RC = {"svg.hashsalt": "pcroc", "svg.fonttype": "none"}


def render_svg(curves: Sequence[Tuple[str, RocCurve]], title: Optional[str] = None) -> bytes:
    """Draw labelled ROC curves over the unit square with the chance diagonal."""
    if not curves:
        raise ValueError("render_svg needs at least one curve")
    with matplotlib.rc_context(SVG_RC):
        figure = Figure(figsize=(5.0, 5.0))
        FigureCanvasSVG(figure)
        ax = figure.add_subplot(1, 1, 1)
        diagonal, = ax.plot([0.0, 1.0], [0.0, 1.0], linestyle="--", linewidth=0.8, color="0.6")
        diagonal.set_gid("roc-diagonal")
        lines = []
        for label, curve in curves:
            line, = ax.plot(curve.fpr, curve.tpr, linewidth=1.5, label=f"{label} (AUC {auc(curve):.3f})")
            lines.append(line)
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.0)
        ax.set_aspect("equal")
        ax.set_xlabel("False positive rate")
        ax.set_ylabel("True positive rate")
        if title:
            ax.set_title(title)
        ax.legend(loc="lower right", fontsize="small")
        # after legend() so the legend handles do not copy the ids
        for k, line in enumerate(lines):
            line.set_gid(f"roc-curve-{k}")
        buffer = io.BytesIO()
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    logger.debug("rendered %d curves to SVG", len(curves))
    return buffer.getvalue()
