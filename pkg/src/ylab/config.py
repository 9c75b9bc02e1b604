"""Run-configuration grammar: `key = value` lines with inline tables.

Example
-------
    task = "scan-annulus"
    seed = 1234
    domain = { kind = "annulus", r0 = 0.1, R = 3.0, n = 3 }
    solver = { path = "radial", h = 0.03125, tol = 1e-10 }
    scan = { r0 = [0.4, 0.2, 0.1], R = [4.0] }
    output = { dir = "out", formats = ["csv", "json"] }

Values are strings, numbers, booleans, single-line lists, or single-line
inline tables.  Unknown keys are hard errors with a close-match suggestion;
duplicates are errors; nothing is silently ignored.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, field

import numpy as np

from . import geometry

__all__ = ["RunConfig", "ConfigError", "Diagnostic", "parse_config",
           "serialize_config", "domain_from_block"]

TASKS = ("solve", "curvature", "verify-convex", "scan-annulus", "cap-check",
         "star-scan", "selftest")

TOP_KEYS = ("task", "seed", "domain", "solver", "scan", "cap", "star", "output")
DOMAIN_KEYS = ("kind", "n", "R", "r0", "center", "axes", "holes", "normal",
               "offset", "smoothing_radius")
SOLVER_KEYS = ("path", "h", "tol", "M", "nodes", "preconditioner")
OUTPUT_KEYS = ("dir", "formats", "per_node")
SCAN_KEYS = ("r0", "R")
CAP_KEYS = ("i",)
STAR_KEYS = ("members", "h")

DOMAIN_KINDS = ("ball", "annulus", "ellipsoid", "ball_minus_balls",
                "half_space_cap")
SOLVER_PATHS = ("radial", "grid", "u_truncated")


@dataclass
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"line {self.line}, col {self.col}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass
class RunConfig:
    task: str = "solve"
    seed: int = 0
    domain: dict = field(default_factory=dict)
    solver: dict = field(default_factory=lambda: {"path": "radial"})
    scan: dict = field(default_factory=dict)
    cap: dict = field(default_factory=dict)
    star: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"dir": "out",
                                                  "formats": ["csv", "json"]})


def _suggest(key, allowed):
    close = difflib.get_close_matches(key, allowed, n=1)
    extra = f"; did you mean {close[0]!r}?" if close else ""
    if key == "mesh_size" and "h" in allowed:
        extra = "; did you mean 'h'?"
    return extra


class _Scanner:
    def __init__(self, text, line_no, diags):
        self.text = text
        self.pos = 0
        self.line = line_no
        self.diags = diags

    def error(self, msg):
        self.diags.append(Diagnostic(self.line, self.pos + 1, msg))
        raise ConfigError(self.diags)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self):
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def value(self):
        self.skip_ws()
        c = self.peek()
        if c == '"':
            return self.string()
        if c == "[":
            return self.list()
        if c == "{":
            return self.table()
        return self.scalar()

    def string(self):
        start = self.pos
        self.pos += 1
        out = []
        while self.pos < len(self.text):
            c = self.text[self.pos]
            if c == '"':
                self.pos += 1
                return "".join(out)
            out.append(c)
            self.pos += 1
        self.pos = start
        self.error("unterminated string")

    def list(self):
        self.pos += 1
        items = []
        while True:
            self.skip_ws()
            if self.peek() == "]":
                self.pos += 1
                return items
            if not self.peek():
                self.error("unterminated list")
            items.append(self.value())
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
            elif self.peek() != "]":
                self.error("expected ',' or ']' in list")

    def table(self):
        self.pos += 1
        out = {}
        while True:
            self.skip_ws()
            if self.peek() == "}":
                self.pos += 1
                return out
            if not self.peek():
                self.error("unterminated inline table")
            key = self.bare_key()
            self.skip_ws()
            if self.peek() != "=":
                self.error(f"expected '=' after key {key!r}")
            self.pos += 1
            if key in out:
                self.error(f"duplicate key {key!r}")
            out[key] = self.value()
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
            elif self.peek() != "}":
                self.error("expected ',' or '}' in inline table")

    def bare_key(self):
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        if self.pos == start:
            self.error("expected a key")
        return self.text[start:self.pos]

    def scalar(self):
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in ",]}#":
            self.pos += 1
        token = self.text[start:self.pos].strip()
        if not token:
            self.error("empty value")
        if token == "true":
            return True
        if token == "false":
            return False
        try:
            if any(c in token for c in ".eE") and not token.lstrip("+-").isdigit():
                return float(token)
            return int(token)
        except ValueError:
            try:
                return float(token)
            except ValueError:
                self.pos = start
                self.error(f"cannot parse value {token!r}")


def parse_config(text: str) -> RunConfig:
    """Parse the documented grammar; raises ConfigError with diagnostics."""
    diags: list[Diagnostic] = []
    raw: dict = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if "=" not in stripped:
            diags.append(Diagnostic(line_no, 1, "expected 'key = value'"))
            raise ConfigError(diags)
        key, _, rest = stripped.partition("=")
        key = key.strip()
        if key not in TOP_KEYS:
            diags.append(Diagnostic(line_no, 1,
                                    f"unknown key {key!r}" + _suggest(key, TOP_KEYS)))
            raise ConfigError(diags)
        if key in raw:
            diags.append(Diagnostic(line_no, 1, f"duplicate key {key!r}"))
            raise ConfigError(diags)
        scanner = _Scanner(rest.strip(), line_no, diags)
        value = scanner.value()
        scanner.skip_ws()
        if scanner.peek():
            scanner.error(f"trailing characters after value for {key!r}")
        raw[key] = value

    cfg = RunConfig()
    if "task" in raw:
        if raw["task"] not in TASKS:
            diags.append(Diagnostic(0, 0, f"unknown task {raw['task']!r}"
                                    + _suggest(str(raw["task"]), TASKS)))
            raise ConfigError(diags)
        cfg.task = raw["task"]
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    for block, allowed in (("domain", DOMAIN_KEYS), ("solver", SOLVER_KEYS),
                           ("output", OUTPUT_KEYS), ("scan", SCAN_KEYS),
                           ("cap", CAP_KEYS), ("star", STAR_KEYS)):
        if block not in raw:
            continue
        val = raw[block]
        if not isinstance(val, dict):
            diags.append(Diagnostic(0, 0, f"{block} must be an inline table"))
            raise ConfigError(diags)
        for k in val:
            if k not in allowed:
                diags.append(Diagnostic(0, 0, f"unknown key {block}.{k}"
                                        + _suggest(k, allowed)))
                raise ConfigError(diags)
        getattr(cfg, block).update(val)
    _validate(cfg, diags)
    return cfg


def _validate(cfg: RunConfig, diags):
    solver = cfg.solver
    if "path" in solver and solver["path"] not in SOLVER_PATHS:
        diags.append(Diagnostic(0, 0, f"unknown solver path {solver['path']!r}"
                                + _suggest(str(solver["path"]), SOLVER_PATHS)))
    for key in ("h", "tol", "M"):
        if key in solver and not (isinstance(solver[key], (int, float))
                                  and solver[key] > 0):
            diags.append(Diagnostic(0, 0, f"solver.{key} must be positive"))
    if cfg.domain:
        kind = cfg.domain.get("kind")
        if kind not in DOMAIN_KINDS:
            diags.append(Diagnostic(0, 0, f"unknown domain kind {kind!r}"
                                    + _suggest(str(kind), DOMAIN_KINDS)))
        elif kind == "annulus":
            r0, R = cfg.domain.get("r0"), cfg.domain.get("R")
            if r0 is not None and R is not None and not 0 < r0 < R:
                diags.append(Diagnostic(
                    0, 0, f"annulus needs 0 < r0 < R, got r0={r0}, R={R}"))
    if cfg.task in ("solve", "curvature", "verify-convex") and not cfg.domain:
        diags.append(Diagnostic(0, 0, f"task {cfg.task!r} needs a domain block"))
    if cfg.task == "scan-annulus" and not cfg.scan:
        diags.append(Diagnostic(0, 0, "task 'scan-annulus' needs a scan block"))
    if diags:
        raise ConfigError(diags)


def domain_from_block(block: dict) -> geometry.DomainSpec:
    kind = block["kind"]
    n = int(block.get("n", 3))
    if kind == "ball":
        return geometry.ball(n, float(block["R"]), block.get("center"))
    if kind == "annulus":
        return geometry.annulus(n, float(block["r0"]), float(block["R"]))
    if kind == "ellipsoid":
        return geometry.ellipsoid([float(a) for a in block["axes"]])
    if kind == "ball_minus_balls":
        center = block.get("center") or [0.0] * n
        holes = [geometry.Ball(tuple(float(x) for x in hole[:-1]), float(hole[-1]))
                 for hole in block.get("holes", [])]
        return geometry.ball_minus_balls(
            n, geometry.Ball(tuple(float(x) for x in center), float(block["R"])),
            holes)
    if kind == "half_space_cap":
        return geometry.half_space_cap(
            n, float(block["R"]), block.get("center"), block.get("normal"),
            float(block.get("offset", 0.0)), block.get("smoothing_radius"))
    raise ConfigError([Diagnostic(0, 0, f"unknown domain kind {kind!r}")])


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_fmt(v)}" for k, v in sorted(value.items()))
        return "{ " + inner + " }"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(parse(t))) == parse(t)."""
    lines = [f'task = "{cfg.task}"', f"seed = {cfg.seed}"]
    for block in ("domain", "solver", "scan", "cap", "star", "output"):
        val = getattr(cfg, block)
        if val:
            lines.append(f"{block} = {_fmt(val)}")
    return "\n".join(lines) + "\n"
