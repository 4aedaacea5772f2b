"""Scenario files: the JSON format describing grid, robots, events, timing.

A scenario carries either a clocked TPO section, a raw constraint list, or
both (intersected).  Parsing is lossless: ``parse -> serialize -> parse`` is
the identity on the parsed representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import MalformedScenarioError
from .tpo import (
    DiffConstraintSet,
    TpoSpec,
    compile_tpo,
    merge_constraints,
    raw_constraints,
)

Cell = tuple[int, int]


@dataclass(frozen=True)
class ScenarioOptions:
    return_to_depot: bool = False
    move_duration: float = 1.0
    action_durations: dict[str, float] = field(default_factory=dict)
    name: str = ""


@dataclass(frozen=True)
class Scenario:
    width: int
    height: int
    walls: tuple[Cell, ...]
    robots: tuple[Cell, ...]
    events: dict[str, tuple[Cell, ...]]  # event -> candidate cells
    tpo: TpoSpec | None
    raw_pairs: tuple[tuple[str, str, float, float | None], ...]
    raw_absolute: tuple[tuple[str, float, float | None], ...]
    service: dict[str, float]
    options: ScenarioOptions

    def constraints(self) -> DiffConstraintSet:
        """Compiled difference bounds for the scenario's timing sections."""
        event_names = tuple(self.events.keys())
        parts = []
        if self.tpo is not None:
            parts.append(compile_tpo(self.tpo))
        if self.raw_pairs or self.raw_absolute:
            parts.append(raw_constraints(event_names, self.raw_pairs, self.raw_absolute))
        if not parts:
            return raw_constraints(event_names)
        merged = parts[0]
        for extra in parts[1:]:
            merged = merge_constraints(merged, extra)
        # keep the scenario's full event list even when the TPO names a subset
        if set(merged.events) != set(event_names):
            missing = [e for e in event_names if e not in merged.events]
            widened = raw_constraints(tuple(merged.events) + tuple(missing))
            merged = merge_constraints(merged, widened)
        return merged


def _expect(cond, msg):
    if not cond:
        raise MalformedScenarioError(msg)


def _cell(value, what) -> Cell:
    _expect(
        isinstance(value, (list, tuple)) and len(value) == 2
        and all(isinstance(v, int) for v in value),
        f"{what}: expected [x, y] integer cell, got {value!r}",
    )
    return (value[0], value[1])


def parse_scenario(text: str) -> Scenario:
    """Parse scenario JSON, validating structure and geometry."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedScenarioError(f"invalid JSON: {exc}") from exc
    _expect(isinstance(doc, dict), "scenario must be a JSON object")

    grid = doc.get("grid")
    _expect(isinstance(grid, dict), "missing 'grid' section")
    width, height = grid.get("width"), grid.get("height")
    _expect(isinstance(width, int) and width > 0, "grid.width must be a positive integer")
    _expect(isinstance(height, int) and height > 0, "grid.height must be a positive integer")
    walls = tuple(_cell(w, "grid.walls") for w in grid.get("walls", []))
    wallset = set(walls)

    def inside(cell):
        return 0 <= cell[0] < width and 0 <= cell[1] < height

    robots_doc = doc.get("robots")
    _expect(isinstance(robots_doc, list) and robots_doc, "missing 'robots' list")
    robots = tuple(_cell(r, "robots") for r in robots_doc)
    for r in robots:
        _expect(inside(r), f"robot start {r} outside the grid")
        _expect(r not in wallset, f"robot start {r} is on a wall")
    _expect(len(set(robots)) == len(robots), "robots must start on distinct cells")

    events_doc = doc.get("events", {})
    _expect(isinstance(events_doc, dict), "'events' must map event -> cell list")
    events: dict[str, tuple[Cell, ...]] = {}
    seen_cells: dict[Cell, str] = {}
    for name, cells in events_doc.items():
        _expect(isinstance(cells, list) and cells, f"event {name!r} needs at least one cell")
        parsed = tuple(_cell(c, f"events.{name}") for c in cells)
        for c in parsed:
            _expect(inside(c), f"event {name!r} cell {c} outside the grid")
            _expect(c not in wallset, f"event {name!r} cell {c} is on a wall")
            _expect(c not in seen_cells, f"cell {c} labeled by both {seen_cells.get(c)!r} and {name!r}")
            _expect(c not in robots, f"event {name!r} cell {c} coincides with a robot start")
            seen_cells[c] = name
        _expect(len(set(parsed)) == len(parsed), f"event {name!r} lists a duplicate cell")
        events[name] = parsed

    tpo = None
    if "tpo" in doc:
        t = doc["tpo"]
        _expect(isinstance(t, dict), "'tpo' must be an object")
        tpo_events = tuple(t.get("events", list(events.keys())))
        for e in tpo_events:
            _expect(e in events, f"tpo event {e!r} has no cells in 'events'")
        edges = tuple((a, b) for a, b in t.get("edges", []))
        clocks = tuple(t.get("clocks", []))
        resets = {ev: frozenset(cs) for ev, cs in t.get("resets", {}).items()}
        guards = {}
        for ev, clauses in t.get("guards", {}).items():
            parsed_clauses = []
            for clause in clauses:
                _expect(
                    isinstance(clause, list) and len(clause) == 3,
                    f"guard clause at {ev!r} must be [clock, op, constant]",
                )
                clock, op, const = clause
                _expect(isinstance(const, (int, float)), f"guard constant at {ev!r} not numeric")
                parsed_clauses.append((clock, op, float(const)))
            guards[ev] = tuple(parsed_clauses)
        try:
            tpo = TpoSpec(events=tpo_events, edges=edges, clocks=clocks,
                          resets=resets, guards=guards)
        except MalformedScenarioError:
            raise
        except Exception as exc:
            raise MalformedScenarioError(f"invalid tpo section: {exc}") from exc

    raw_pairs: list[tuple[str, str, float, float | None]] = []
    raw_absolute: list[tuple[str, float, float | None]] = []
    if "constraints" in doc:
        c = doc["constraints"]
        _expect(isinstance(c, dict), "'constraints' must be an object")
        for item in c.get("pairs", []):
            _expect(isinstance(item, list) and len(item) == 4, f"pair constraint {item!r}")
            a, b, lo, hi = item
            _expect(a in events and b in events, f"pair constraint on unknown events {a!r},{b!r}")
            raw_pairs.append((a, b, float(lo), None if hi is None else float(hi)))
        for item in c.get("absolute", []):
            _expect(isinstance(item, list) and len(item) == 3, f"absolute constraint {item!r}")
            ev, lo, hi = item
            _expect(ev in events, f"absolute constraint on unknown event {ev!r}")
            raw_absolute.append((ev, float(lo), None if hi is None else float(hi)))

    service = {}
    for ev, delay in doc.get("service", {}).items():
        _expect(ev in events, f"service delay for unknown event {ev!r}")
        _expect(isinstance(delay, (int, float)) and delay >= 0, f"service delay for {ev!r} must be >= 0")
        service[ev] = float(delay)

    opts = doc.get("options", {})
    _expect(isinstance(opts, dict), "'options' must be an object")
    move_duration = float(opts.get("move_duration", 1.0))
    _expect(move_duration > 0, "options.move_duration must be positive")
    action_durations = {}
    for action, dur in opts.get("action_durations", {}).items():
        _expect(isinstance(dur, (int, float)) and dur > 0, f"duration for {action!r} must be positive")
        action_durations[action] = float(dur)
    options = ScenarioOptions(
        return_to_depot=bool(opts.get("return_to_depot", False)),
        move_duration=move_duration,
        action_durations=action_durations,
        name=str(opts.get("name", "")),
    )

    return Scenario(
        width=width, height=height, walls=walls, robots=robots, events=events,
        tpo=tpo, raw_pairs=tuple(raw_pairs), raw_absolute=tuple(raw_absolute),
        service=service, options=options,
    )


def serialize_scenario(sc: Scenario) -> str:
    doc: dict = {
        "grid": {
            "width": sc.width,
            "height": sc.height,
            "walls": [list(w) for w in sc.walls],
        },
        "robots": [list(r) for r in sc.robots],
        "events": {name: [list(c) for c in cells] for name, cells in sc.events.items()},
    }
    if sc.tpo is not None:
        doc["tpo"] = {
            "events": list(sc.tpo.events),
            "edges": [list(e) for e in sc.tpo.edges],
            "clocks": list(sc.tpo.clocks),
            "resets": {ev: sorted(cs) for ev, cs in sc.tpo.resets.items()},
            "guards": {ev: [[c, op, k] for c, op, k in clauses]
                       for ev, clauses in sc.tpo.guards.items()},
        }
    if sc.raw_pairs or sc.raw_absolute:
        doc["constraints"] = {
            "pairs": [[a, b, lo, hi] for a, b, lo, hi in sc.raw_pairs],
            "absolute": [[ev, lo, hi] for ev, lo, hi in sc.raw_absolute],
        }
    if sc.service:
        doc["service"] = dict(sc.service)
    doc["options"] = {
        "return_to_depot": sc.options.return_to_depot,
        "move_duration": sc.options.move_duration,
        "action_durations": dict(sc.options.action_durations),
        "name": sc.options.name,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
