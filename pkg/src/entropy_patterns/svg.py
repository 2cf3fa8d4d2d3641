"""Tiny dependency-free SVG writers for histograms and box plots.

Output is deterministic text: same data in, same bytes out. Nothing here
tries to be a plotting library; it exists so a run can drop viewable
artifacts next to the CSVs without pulling in a graphics stack.
"""

WIDTH, HEIGHT = 640, 400
MARGIN = 48


def _header(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle">{title}</text>',
    ]


def _axes() -> list:
    x0, y0, x1, y1 = MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, MARGIN
    return [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]


def render_histogram(hist, title: str = "pairwise L1 distances") -> str:
    """Vertical bars, one per bin, count axis auto-scaled."""
    parts = _header(title) + _axes()
    counts = list(hist.counts)
    edges = list(hist.bin_edges)
    peak = max(max(counts), 1)
    span_x = WIDTH - 2 * MARGIN
    span_y = HEIGHT - 2 * MARGIN
    lo, hi = edges[0], edges[-1]
    width = hi - lo or 1.0
    for i, c in enumerate(counts):
        x = MARGIN + span_x * (edges[i] - lo) / width
        w = span_x * (edges[i + 1] - edges[i]) / width
        h = span_y * c / peak
        parts.append(
            f'<rect x="{x:.2f}" y="{HEIGHT - MARGIN - h:.2f}" width="{max(w, 0.5):.2f}" '
            f'height="{h:.2f}" fill="steelblue" stroke="none"/>'
        )
    parts.append(
        f'<text x="{MARGIN}" y="{HEIGHT - 12}">'
        f"n={hist.sample_count} mean={hist.mean:.3f} median={hist.median:.3f}</text>"
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_box_plot(years, title: str = "monthly std of opens") -> str:
    """One box per year: quartile box, median line, 1.5 IQR whiskers."""
    parts = _header(title) + _axes()
    if years:
        values = [v for y in years for v in (y.whisker_low, y.whisker_high)]
        lo, hi = min(values), max(values)
        span = hi - lo or 1.0
        span_y = HEIGHT - 2 * MARGIN

        def ypix(v):
            return HEIGHT - MARGIN - span_y * (v - lo) / span

        slot = (WIDTH - 2 * MARGIN) / len(years)
        for i, y in enumerate(years):
            cx = MARGIN + slot * (i + 0.5)
            half = min(slot * 0.3, 40)
            parts.append(
                f'<line x1="{cx:.2f}" y1="{ypix(y.whisker_low):.2f}" '
                f'x2="{cx:.2f}" y2="{ypix(y.whisker_high):.2f}" stroke="black"/>'
            )
            parts.append(
                f'<rect x="{cx - half:.2f}" y="{ypix(y.q3):.2f}" width="{2 * half:.2f}" '
                f'height="{max(ypix(y.q1) - ypix(y.q3), 0.5):.2f}" '
                f'fill="lightsteelblue" stroke="black"/>'
            )
            parts.append(
                f'<line x1="{cx - half:.2f}" y1="{ypix(y.median):.2f}" '
                f'x2="{cx + half:.2f}" y2="{ypix(y.median):.2f}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{cx:.2f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle">{y.year}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(text: str, path) -> None:
    with open(path, "w") as fh:
        fh.write(text)
