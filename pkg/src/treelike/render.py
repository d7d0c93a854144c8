"""Deterministic SVG figures: the tree T_n, the set Gamma_n, and ruled-point labels of f_n, g_n.

All geometry is built from exact rationals in a :class:`Scene` and converted to
pixel coordinates only when the SVG text is written (fixed scale,
round-half-even to hundredths of a pixel).  Output is byte-identical across
runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

from .construction import GammaSet, Level, ruled_set
from .exact_arith import HALF, ONE, TWO_THIRDS, ZERO, Q, Rational, epsilon, fmt
from .tree import SPINE, EdgeKey, Leg, Spine, TreeLevel, TreePoint, common_edge, tree_level

SPINE_WEIGHT = 8
GAP = Q(1, 4)
# unit directions (exact) for the three legs of a triod in the spatial picture
LEG_DIRECTIONS = ((Q(-3, 5), Q(4, 5)), (ZERO, ONE), (Q(3, 5), Q(4, 5)))


def _px(x: Rational) -> str:
    k = round(Q(x) * 100)
    sign = "-" if k < 0 else ""
    k = abs(k)
    whole, frac = divmod(k, 100)
    if frac == 0:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:02d}".rstrip("0")


@dataclass
class Scene:
    """Styled primitives in exact user coordinates (y grows downward)."""

    width: int
    height: int
    elements: list[str] = field(default_factory=list)

    def line(self, x1, y1, x2, y2, cls: str) -> None:
        self.elements.append(
            f'<line class="{cls}" x1="{_px(x1)}" y1="{_px(y1)}" x2="{_px(x2)}" y2="{_px(y2)}"/>'
        )

    def polyline(self, pts: list[tuple[Rational, Rational]], cls: str) -> None:
        coords = " ".join(f"{_px(x)},{_px(y)}" for x, y in pts)
        self.elements.append(f'<polyline class="{cls}" points="{coords}"/>')

    def rect(self, x, y, w, h, cls: str) -> None:
        self.elements.append(
            f'<rect class="{cls}" x="{_px(x)}" y="{_px(y)}" width="{_px(w)}" height="{_px(h)}"/>'
        )

    def dot(self, x, y, cls: str = "dot") -> None:
        self.elements.append(f'<circle class="{cls}" cx="{_px(x)}" cy="{_px(y)}" r="2.5"/>')

    def text(self, x, y, label: str, cls: str = "label", anchor: str = "middle", point: str | None = None) -> None:
        body = _label_markup(label)
        where = f' data-point="{point}"' if point else ""
        self.elements.append(
            f'<text class="{cls}" x="{_px(x)}" y="{_px(y)}" text-anchor="{anchor}"{where} '
            f'data-label="{escape(label, {chr(34): "&quot;"})}">{body}</text>'
        )

    def to_svg(self, title: str, style: str) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f"<title>{escape(title)}</title>\n<style>{style}</style>\n"
        )
        return head + "\n".join(self.elements) + "\n</svg>\n"


def _label_markup(label: str) -> str:
    """Render ``F^{p}_{i}`` and ``e_{n}`` style labels with tspans."""
    out = []
    k = 0
    while k < len(label):
        ch = label[k]
        if ch in "^_" and k + 1 < len(label):
            if label[k + 1] == "{":
                end = label.index("}", k)
                body = label[k + 2 : end]
                k = end + 1
            else:
                body = label[k + 1]
                k += 2
            shift = "super" if ch == "^" else "sub"
            out.append(f'<tspan baseline-shift="{shift}" font-size="8px">{escape(body)}</tspan>')
            continue
        out.append(escape(ch))
        k += 1
    return "".join(out)


# -- layouts ---------------------------------------------------------------------


def leg_order(level: TreeLevel) -> list[EdgeKey]:
    """Legs with the larger triods first, then by attachment point and index."""
    legs = [e for e in level.edges() if e != SPINE]
    return sorted(legs, key=lambda e: (-level.leg_length[e[0]], e[0], e[1]))


@dataclass
class FlatLayout:
    """T_n cut into disjoint arcs laid end to end: the spine, then the legs."""

    level: TreeLevel
    offsets: dict[EdgeKey, Rational]
    lengths: dict[EdgeKey, Rational]
    total: Rational

    @classmethod
    def of(cls, level: TreeLevel) -> FlatLayout:
        offsets, lengths = {}, {}
        run = ZERO
        for e in [SPINE] + leg_order(level):
            length = Q(SPINE_WEIGHT) if e == SPINE else level.leg_length[e[0]]
            offsets[e] = run
            lengths[e] = length
            run += length + GAP
        return cls(level, offsets, lengths, run - GAP)

    def coord(self, edge: EdgeKey, pos: Rational) -> Rational:
        return self.offsets[edge] + self.lengths[edge] * pos


def _segment_coords(layout: FlatLayout, u: TreePoint, v: TreePoint):
    """Flattened coordinates of the ends of a coordinate motion u -> v on one edge."""
    if u == v:
        e, pu, _ = common_edge(u, u)
        return layout.coord(e, pu), layout.coord(e, pu)
    e, pu, pv = common_edge(u, v)
    return layout.coord(e, pu), layout.coord(e, pv)


# -- figures ---------------------------------------------------------------------

TREE_STYLE = (
    ".spine{stroke:#000;stroke-width:2}.leg{stroke:#000;stroke-width:1.5}"
    ".arc{stroke:#000;stroke-width:2}.dot{fill:#000}.tip{fill:#fff;stroke:#000}"
    ".label{font-family:serif;font-size:11px}"
)


def render_tree(n: int) -> str:
    """T_n twice: spatially (triods sized by leg length) and as a row of disjoint arcs."""
    level = tree_level(n)
    width, margin = 1000, 120
    scale = Q(width - 2 * margin)
    top_h = 360
    layout = FlatLayout.of(level)
    flat_scale = Q(width - 80) / layout.total
    scene = Scene(width, top_h + 160)

    # spatial: the spine along the bottom of the upper panel, triods rising from it
    base_y = Q(top_h - 40)
    leg_scale = scale / 5
    scene.line(margin, base_y, margin + scale, base_y, "spine")
    for p in level.attachments:
        x0 = margin + scale * p
        for i, (dx, dy) in enumerate(LEG_DIRECTIONS):
            length = level.leg_length[p] * leg_scale
            scene.line(x0, base_y, x0 + dx * length, base_y - dy * length, "leg")
        scene.dot(x0, base_y, "dot branch")
        scene.text(x0, base_y + 18, fmt_short(p))

    # flattened: one row of arcs, larger triods further left
    row_y = Q(top_h + 60)
    for e, off in layout.offsets.items():
        x1 = 40 + flat_scale * off
        x2 = x1 + flat_scale * layout.lengths[e]
        scene.line(x1, row_y, x2, row_y, "arc")
        if e == SPINE:
            for p in level.attachments:
                scene.dot(x1 + flat_scale * layout.lengths[e] * p, row_y)
            scene.text((x1 + x2) / 2, row_y + 30, "[0,1]")
        else:
            scene.dot(x1, row_y)
            if level.n <= 3:
                scene.text((x1 + x2) / 2, row_y - 10, f"F^{{{fmt_short(e[0])}}}_{e[1]}")
    return scene.to_svg(f"T_{n}", TREE_STYLE)


GAMMA_STYLE = (
    ".band{fill:#f2f2f2;stroke:none}.grid{stroke:#bbb;stroke-width:0.5}"
    ".diag{stroke:#e08080;stroke-width:0.75}.gamma{fill:none;stroke:#000;stroke-width:1.5;"
    "stroke-linejoin:round;stroke-linecap:round}.label{font-family:serif;font-size:11px}"
)


def gamma_polylines(gamma: GammaSet, layout: FlatLayout) -> list[list[tuple[Rational, Rational]]]:
    """Gamma as maximal polylines in flattened product coordinates (x right, y up)."""
    lines: list[list[tuple[Rational, Rational]]] = []
    for _, arc in gamma.arcs:
        current: list[tuple[Rational, Rational]] = []
        nodes = arc.nodes
        if len(nodes) == 1:
            x, _ = _segment_coords(layout, nodes[0][0], nodes[0][0])
            y, _ = _segment_coords(layout, nodes[0][1], nodes[0][1])
            lines.append([(x, y)])
            continue
        for a, b in arc.segments():
            xa, xb = _segment_coords(layout, a[0], b[0])
            ya, yb = _segment_coords(layout, a[1], b[1])
            if current and current[-1] == (xa, ya):
                current.append((xb, yb))
            else:
                if current:
                    lines.append(current)
                current = [(xa, ya), (xb, yb)]
        lines.append(current)
    return lines


def render_gamma(gamma: GammaSet) -> str:
    """Gamma_n in the product of flattened layouts, with the diagonal as a light guide."""
    level = gamma.level
    layout = FlatLayout.of(level)
    size, margin = 1000, 40
    s = Q(size - 2 * margin) / layout.total
    scene = Scene(size, size)

    def X(u):
        return margin + s * u

    def Y(v):
        return size - margin - s * v

    sp = layout.lengths[SPINE]
    scene.rect(X(0), Y(sp), s * sp, s * sp, "band")
    for e, off in layout.offsets.items():
        end = off + layout.lengths[e]
        for c in (off, end):
            scene.line(X(c), Y(0), X(c), Y(layout.total), "grid")
            scene.line(X(0), Y(c), X(layout.total), Y(c), "grid")
        scene.line(X(off), Y(off), X(end), Y(end), "diag")
    for pts in gamma_polylines(gamma, layout):
        scene.polyline([(X(u), Y(v)) for u, v in pts], "gamma")
    for t in (ZERO, HALF, TWO_THIRDS, ONE):
        scene.text(X(sp * t), Y(0) + 16, fmt_short(t))
        scene.text(X(0) - 6, Y(sp * t) + 4, fmt_short(t), anchor="end")
    return scene.to_svg(f"Gamma_{gamma.n}", GAMMA_STYLE)


def fmt_short(x: Rational) -> str:
    return str(x.numerator) if x.denominator == 1 else fmt(x)


def value_label(v: TreePoint, n: int) -> str:
    """Image label in the style F^{p}_{i} (for F^p_i(1)), e_n-aware on the spine."""
    if type(v) is Leg:
        head = f"F^{{{fmt_short(v.p)}}}_{v.i}"
        return head if v.t == 1 else f"{head}({fmt_short(v.t)})"
    eps = epsilon(n)
    named = {eps: f"ε_{n}", TWO_THIRDS + eps: f"2/3+ε_{n}", TWO_THIRDS - eps: f"2/3-ε_{n}"}
    return named.get(v.t, fmt_short(v.t))


MAPS_STYLE = (
    ".spine{stroke:#000;stroke-width:2}.leg{stroke:#000;stroke-width:1.5}.dot{fill:#000}"
    ".f-label{font-family:serif;font-size:9px;fill:#0040a0}"
    ".g-label{font-family:serif;font-size:9px;fill:#a03000}.label{font-family:serif;font-size:11px}"
)


def render_maps(level: Level) -> str:
    """The domain tree T_{n+1} with f_n(x) above and g_n(x) below every ruled point x."""
    n = level.n
    dom = tree_level(n + 1)
    rs = ruled_set(n)
    width, margin = 2400, 160
    scale = Q(width - 2 * margin)
    panel_h = 420
    leg_scale = Q(panel_h - 120)
    scene = Scene(width, 2 * panel_h)

    def place(x: TreePoint, base_y):
        if type(x) is Spine:
            return margin + scale * x.t, base_y
        dx, dy = LEG_DIRECTIONS[x.i]
        length = dom.leg_length[x.p] * leg_scale * x.t / 2
        return margin + scale * x.p + dx * length, base_y - dy * length

    for k, (name, m) in enumerate((("f", level.f), ("g", level.g))):
        base_y = Q(panel_h * (k + 1) - 40)
        scene.line(margin, base_y, margin + scale, base_y, "spine")
        for p in dom.attachments:
            for i in range(3):
                tip = place(Leg(p, i, ONE), base_y)
                scene.line(margin + scale * p, base_y, tip[0], tip[1], "leg")
        scene.text(margin, Q(panel_h * k + 20), f"{name}_{n}", anchor="start")
        for j, rp in enumerate(rs.points):
            x, y = place(rp.point, base_y)
            scene.dot(x, y)
            offset = 12 if type(rp.point) is Leg else 14 + 10 * (j % 3)
            scene.text(
                x,
                y - offset if type(rp.point) is Leg else y + offset,
                value_label(m(rp.point), n),
                f"{name}-label",
                point=str(rp.point),
            )
    return scene.to_svg(f"f_{n} and g_{n} on ruled points", MAPS_STYLE)
