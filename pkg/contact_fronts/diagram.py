"""SVG space-time diagrams of single and coupled runs."""

from typing import Callable, List, Optional, Sequence, Tuple

from lxml import etree

from .dynamics import Trajectory
from .errors import PreconditionError
from .lattice import BLOCKED, EMPTY, OCCUPIED
from .paths import PathWitness

SVG_NS = "http://www.w3.org/2000/svg"

STATE_FILL = {OCCUPIED: "#ffffff", EMPTY: "#000000", BLOCKED: "#999999"}

# coupled layers, keyed by how many of (Spont, IS, CP) are occupied
LAYER_FILL = {3: "#ffffff", 2: "#d0d0d0", 1: "#606060", 0: "#000000"}
LAYER_LABELS = (
    (3, "Spont occupied"),
    (2, "IS occupied only"),
    (1, "CP occupied only"),
    (0, "none occupied"),
)


def _tag(name: str) -> str:
    return f"{{{SVG_NS}}}{name}"


def _num(value: float) -> str:
    return f"{value:.3f}".rstrip("0").rstrip(".")


class SpaceTimeDiagram:
    """Sites run left to right, time runs upwards."""

    def __init__(
        self,
        lo: int,
        hi: int,
        start: float,
        end: float,
        cell: float = 8.0,
        height: float = 600.0,
        margin: float = 10.0,
        legend: Optional[Sequence[Tuple[str, str]]] = None,
    ):
        self.lo = lo
        self.hi = hi
        self.start = start
        self.end = end
        self.cell = cell
        self.margin = margin
        self.time_scale = height / (end - start) if end > start else 1.0
        self.plot_height = (end - start) * self.time_scale
        self.legend = list(legend or [])
        legend_height = 16.0 * len(self.legend) + (margin if self.legend else 0.0)
        width = (hi - lo + 1) * cell + 2 * margin
        total = self.plot_height + 2 * margin + legend_height

        self.root = etree.Element(_tag("svg"), nsmap={None: SVG_NS})
        self.root.set("width", _num(width))
        self.root.set("height", _num(total))
        self.root.set("viewBox", f"0 0 {_num(width)} {_num(total)}")
        self.cells = etree.SubElement(self.root, _tag("g"), id="cells")
        self.overlay = etree.SubElement(self.root, _tag("g"), id="overlay")
        if self.legend:
            self._draw_legend()

    def x(self, site: float) -> float:
        return self.margin + (site - self.lo) * self.cell

    def y(self, time: float) -> float:
        return self.margin + (self.end - time) * self.time_scale

    def add_band(self, site: int, t0: float, t1: float, fill: str):
        """Fill one site over [t0, t1)."""
        etree.SubElement(
            self.cells,
            _tag("rect"),
            x=_num(self.x(site)),
            y=_num(self.y(t1)),
            width=_num(self.cell),
            height=_num((t1 - t0) * self.time_scale),
            fill=fill,
        )

    def add_path(self, witness: PathWitness, color: str = "red"):
        """Polyline through the centres of the sites a path visits."""
        points: List[str] = []
        for segment in witness.segments:
            centre = self.x(segment.site + 0.5)
            points.append(f"{_num(centre)},{_num(self.y(segment.t_start))}")
            points.append(f"{_num(centre)},{_num(self.y(segment.t_end))}")
        etree.SubElement(
            self.overlay,
            _tag("polyline"),
            points=" ".join(points),
            fill="none",
            stroke=color,
            **{"stroke-width": _num(self.cell / 3)},
        )

    def _draw_legend(self):
        group = etree.SubElement(self.root, _tag("g"), id="legend")
        top = self.plot_height + 2 * self.margin
        for i, (fill, label) in enumerate(self.legend):
            y = top + 16.0 * i
            etree.SubElement(
                group, _tag("rect"), x=_num(self.margin), y=_num(y), width="12", height="12",
                fill=fill, stroke="#000000",
            )
            text = etree.SubElement(group, _tag("text"), x=_num(self.margin + 18), y=_num(y + 10))
            text.set("font-size", "10")
            text.text = label

    def to_bytes(self) -> bytes:
        return etree.tostring(self.root, pretty_print=True, xml_declaration=True, encoding="utf-8")

    def write(self, path: str):
        with open(path, "wb") as f:
            f.write(self.to_bytes())


def _span(trajectories: Sequence[Trajectory]) -> Tuple[int, int]:
    for traj in trajectories:
        if not traj.retained:
            raise PreconditionError("space-time diagrams need retain = 'full'")
    return min(t.window[0] for t in trajectories), max(t.window[1] for t in trajectories)


def _bands(
    trajectories: Sequence[Trajectory], site: int, colour: Callable, end: float
) -> List[Tuple[float, float, str]]:
    """Constant-colour intervals of one site, merged across all runs."""
    times = sorted({t for traj in trajectories for t in traj.site_history(site)[0] if t < end})
    bands: List[Tuple[float, float, str]] = []
    for t0, t1 in zip(times, times[1:] + [end]):
        fill = colour([traj.state_at(site, t0) for traj in trajectories])
        if bands and bands[-1][2] == fill:
            bands[-1] = (bands[-1][0], t1, fill)
        else:
            bands.append((t0, t1, fill))
    return bands


def _draw(diagram: SpaceTimeDiagram, trajectories: Sequence[Trajectory], colour: Callable, end: float):
    for site in range(diagram.lo, diagram.hi + 1):
        for t0, t1, fill in _bands(trajectories, site, colour, end):
            if t1 > t0:
                diagram.add_band(site, t0, t1, fill)


def render_run(traj: Trajectory, witness: Optional[PathWitness] = None, **kwargs) -> SpaceTimeDiagram:
    """Occupied white, Empty black, Blocked gray."""
    lo, hi = _span([traj])
    diagram = SpaceTimeDiagram(
        lo, hi, traj.start, traj.end,
        legend=[(STATE_FILL[s], name) for s, name in ((OCCUPIED, "occupied"), (EMPTY, "empty"), (BLOCKED, "blocked"))],
        **kwargs,
    )
    _draw(diagram, [traj], lambda states: STATE_FILL[states[0]], traj.end)
    if witness is not None:
        diagram.add_path(witness)
    return diagram


def coupled_layer(states: Sequence[int]) -> int:
    """Number of processes among (Spont, IS, CP) occupying the site."""
    return sum(state == OCCUPIED for state in states)


def render_coupled(
    xi: Trajectory,
    eta: Trajectory,
    zeta: Trajectory,
    witness: Optional[PathWitness] = None,
    **kwargs,
) -> SpaceTimeDiagram:
    """Four layers: white Spont, light gray IS only, dark gray CP only, black none."""
    lo, hi = _span([xi, eta, zeta])
    diagram = SpaceTimeDiagram(
        lo, hi, xi.start, xi.end, legend=[(LAYER_FILL[k], label) for k, label in LAYER_LABELS], **kwargs
    )
    _draw(diagram, [xi, eta, zeta], lambda states: LAYER_FILL[coupled_layer(states)], xi.end)
    if witness is not None:
        diagram.add_path(witness)
    return diagram
