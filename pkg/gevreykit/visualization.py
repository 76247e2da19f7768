"""
Terminal and SVG rendering of Newton polygons and index summaries.
"""
from typing import Iterable, Optional, Tuple

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    MATPLOTLIB_AVAILABLE = True
except ImportError:
    MATPLOTLIB_AVAILABLE = False

from .analysis import AnalysisReport, NewtonPolygon, distance_d
from .series import format_rat

Point = Tuple[int, int]


class TerminalVisualizer:
    """
    ASCII plots of the exponent plane: j to the right, alpha upwards.
    """

    def __init__(self, width: int = 60):
        self.width = width
        self.vertex_char = "●"
        self.point_char = "○"
        self.outside_char = "×"
        self.fill_char = "·"

    def create_polygon_plot(self, poly: NewtonPolygon, lambda0: Iterable[Point] = (),
                            lambda1: Iterable[Point] = ()) -> str:
        """
        Grid of the polygon region with Lambda_0 (○, vertices ●) and Lambda_1 (×) points.

        Returns:
            String representation of the plot
        """
        vertices = set(poly.vertices)
        zero = set(lambda0)
        one = set(lambda1)
        top = max([n for _, n in poly.vertices] + [a for _, a in zero | one] + [0]) + 1
        lines = ["NEWTON POLYGON", "=" * 50]
        for alpha in range(top, -1, -1):
            row = []
            for j in range(poly.m + 1):
                point = (j, alpha)
                if point in vertices:
                    row.append(self.vertex_char)
                elif point in one:
                    row.append(self.outside_char)
                elif point in zero:
                    row.append(self.point_char)
                elif alpha <= poly.height(j):
                    row.append(self.fill_char)
                else:
                    row.append(" ")
            lines.append(f"{alpha:>3} | " + "  ".join(row))
        lines.append("    +" + "-" * (3 * (poly.m + 1)))
        lines.append("      " + "  ".join(str(j % 10) for j in range(poly.m + 1)) + "   j")
        lines.append("")
        lines.append(f"{self.vertex_char} vertex  {self.point_char} c(0) != 0  "
                     f"{self.outside_char} c(0) = 0  {self.fill_char} polygon")
        return "\n".join(lines)

    def create_index_summary(self, report: AnalysisReport) -> str:
        indices = report.indices
        conditions = report.conditions
        lines = [
            "INDEX SUMMARY",
            "=" * 50,
            f"Equation type: {report.equation_type.value.replace('_', ' ')}",
            f"(N):  {'holds' if conditions.n.holds else 'FAILS'} - {conditions.n.status}",
            f"(GP): {conditions.gp.status.value}" + (f" - {conditions.gp.detail}" if conditions.gp.detail else ""),
            f"(R):  {'holds' if conditions.r else 'fails'}",
            f"sigma0 = {indices.to_dict()['sigma0']}",
            f"s0     = {indices.to_dict()['s0']}",
            f"s1     = {indices.to_dict()['s1']}",
            f"Predicted class: {report.predicted_class}",
        ]
        return "\n".join(lines)


def render_polygon_svg(report: AnalysisReport, output_path: str) -> Optional[str]:
    """
    Newton polygon with the Lambda_0 and Lambda_1 points as an SVG file.

    The region under the boundary is shaded, each vertex is labelled with its
    coordinates, and each Lambda_1 point gets an arrow down to the boundary
    labelled with its distance d. Text is kept as SVG text elements.

    Returns:
        Path written, or None when matplotlib is not installed
    """
    if not MATPLOTLIB_AVAILABLE:
        return None
    poly = report.polygon
    norm = report.norm
    zero = sorted(p.as_tuple() for p in norm.lambda0)
    one = sorted(p.as_tuple() for p in norm.lambda1)
    left = poly.vertices[-1]
    outline = [(poly.m, -0.5)] + list(poly.vertices) + [(-0.5, left[1])]

    with plt.rc_context({"svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.fill([x for x, _ in outline] + [-0.5], [y for _, y in outline] + [-0.5],
                color="tab:blue", alpha=0.15, label="N0")
        ax.plot([x for x, _ in outline], [y for _, y in outline], color="black", linewidth=1.5)
        for j, n in poly.vertices:
            ax.annotate(f"({j}, {n})", (j, n), textcoords="offset points", xytext=(4, 4), fontsize=8)
        if zero:
            ax.scatter([p[0] for p in zero], [p[1] for p in zero], marker="o", label="c(0) != 0")
        if one:
            ax.scatter([p[0] for p in one], [p[1] for p in one], marker="x", label="c(0) = 0")
        for j, alpha in one:
            if j > poly.m:
                continue
            base = float(poly.height(j))
            ax.annotate("", xy=(j, base), xytext=(j, alpha),
                        arrowprops=dict(arrowstyle="->", color="tab:red", linewidth=1))
            ax.annotate(f"d={format_rat(distance_d(poly, (j, alpha)))}", (j, (alpha + base) / 2),
                        textcoords="offset points", xytext=(6, 0), fontsize=8, color="tab:red")
        top = max([n for _, n in poly.vertices] + [a for _, a in zero + one] + [0])
        ax.set_xlim(-0.5, poly.m + 0.5)
        ax.set_ylim(-0.5, top + 1)
        ax.set_xlabel("j")
        ax.set_ylabel("alpha")
        ax.set_title(f"Newton polygon: {report.name}")
        ax.legend(loc="upper right")
        ax.grid(True, alpha=0.3)
        fig.savefig(output_path, format="svg")
        plt.close(fig)
    return output_path
