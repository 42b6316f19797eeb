"""Minimal hand-written SVG charts (line, bar, box) for the report outputs."""
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=60, right=20, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _num(x):
    return f"{x:.2f}".rstrip("0").rstrip(".")


class _Frame:
    def __init__(self, x_range, y_range):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def x(self, v):
        return MARGIN["left"] + (v - self.x0) / (self.x1 - self.x0) * self.pw

    def y(self, v):
        return MARGIN["top"] + (1 - (v - self.y0) / (self.y1 - self.y0)) * self.ph


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def _document(body, title, xlabel, ylabel, frame, x_ticks=None):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    left, bottom = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN["right"]}" y2="{bottom}" stroke="black"/>')
    for v in _ticks(frame.y0, frame.y1):
        y = frame.y(v)
        out.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{_num(v)}</text>')
    for v, label in (x_ticks if x_ticks is not None else [(t, _num(t)) for t in _ticks(frame.x0, frame.x1)]):
        x = frame.x(v)
        out.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{bottom + 16}" text-anchor="middle">{escape(label)}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>'
    )
    out.extend(body)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart(series, title="", xlabel="", ylabel="", y_range=None):
    """``series`` maps a legend label to (xs, ys)."""
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1]]
    frame = _Frame((min(xs), max(xs)), y_range or (min(ys), max(ys)))
    body = []
    for k, (name, (sx, sy)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{frame.x(x):.1f},{frame.y(y):.1f}" for x, y in zip(sx, sy))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 * k
        lx = WIDTH - MARGIN["right"] - 120
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 16}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 20}" y="{ly + 4}">{escape(name)}</text>')
    return _document(body, title, xlabel, ylabel, frame)


def bar_chart(labels, values, annotations=None, title="", xlabel="", ylabel=""):
    """Signed bars, optionally annotated (e.g. significance stars)."""
    lo, hi = min(0.0, min(values)), max(0.0, max(values))
    frame = _Frame((0, len(values)), (lo, hi))
    body = []
    bw = frame.pw / max(1, len(values))
    zero = frame.y(0.0)
    for i, v in enumerate(values):
        x = frame.x(i) + bw * 0.1
        top = min(zero, frame.y(v))
        h = abs(frame.y(v) - zero)
        body.append(f'<rect x="{x:.1f}" y="{top:.1f}" width="{bw * 0.8:.1f}" height="{h:.1f}" fill="{PALETTE[0]}"/>')
        if annotations and annotations[i]:
            ty = top - 3 if v >= 0 else top + h + 11
            body.append(f'<text x="{x + bw * 0.4:.1f}" y="{ty:.1f}" text-anchor="middle">{escape(annotations[i])}</text>')
    ticks = [(i + 0.5, lab) for i, lab in enumerate(labels)]
    if len(ticks) > 20:
        step = -(-len(ticks) // 20)
        ticks = ticks[::step]
    return _document(body, title, xlabel, ylabel, frame, ticks)


def box_chart(groups, title="", xlabel="", ylabel=""):
    """``groups`` maps a label to a five-number summary dict (min, q1, median, q3, max)."""
    lo = min(g["min"] for g in groups.values())
    hi = max(g["max"] for g in groups.values())
    frame = _Frame((0, len(groups)), (lo, hi))
    body = []
    bw = frame.pw / max(1, len(groups))
    for i, g in enumerate(groups.values()):
        cx = frame.x(i + 0.5)
        half = bw * 0.3
        body.append(f'<line x1="{cx:.1f}" y1="{frame.y(g["min"]):.1f}" x2="{cx:.1f}" y2="{frame.y(g["max"]):.1f}" stroke="black"/>')
        top, bot = frame.y(g["q3"]), frame.y(g["q1"])
        body.append(f'<rect x="{cx - half:.1f}" y="{top:.1f}" width="{2 * half:.1f}" height="{bot - top:.1f}" '
                    f'fill="{PALETTE[i % len(PALETTE)]}" fill-opacity="0.5" stroke="black"/>')
        my = frame.y(g["median"])
        body.append(f'<line x1="{cx - half:.1f}" y1="{my:.1f}" x2="{cx + half:.1f}" y2="{my:.1f}" stroke="black" stroke-width="2"/>')
    ticks = [(i + 0.5, lab) for i, lab in enumerate(groups)]
    return _document(body, title, xlabel, ylabel, frame, ticks)
