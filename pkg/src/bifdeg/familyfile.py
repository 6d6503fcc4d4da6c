"""Reader for family-definition files.

The format is line oriented::

    # comment
    [problem]
    q = 2
    n = 1
    m = 2
    k = 1
    support_radius = 1.0
    lambda_radius = 5.0
    mode = quotient            # or principal (default)

    [symbol]
    p[1][1] = "x1 + i*xi1"
    ...
    infinity[1][1] = "1"       # symbol at λ = ∞, in x and xi only

    [finite_family]
    q = 1
    N = 1
    f[1] = "l1*u1 - u1^3"
    lambda0 = "0"              # optional, comma separated
    disk_radius = 0.5          # optional

    [quadrature]
    scheme = gauss             # or montecarlo
    order = 16

    [path]                     # matrix path in t ∈ [0, 1] for the parity oracle
    N = 2
    a[1][1] = "2*t - 1"

    [loop]                     # matrix loop in t ∈ [0, 2π) for the winding oracle
    m = 1
    g[1][1] = "exp(i*t)"

Indices are 1-based.  Values are double-quoted strings or bare numbers and
words.  Any section may be absent, except that degree computations need
``[problem]`` and ``[symbol]``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import exprlang as E
from .findim import FiniteFamily
from .quadrature import QuadratureSpec
from .symbol import SymbolFamily

__all__ = ["FamilyFile", "FamilyFileError", "read_family_file", "parse_family_text"]

SECTIONS = ("problem", "symbol", "finite_family", "quadrature", "path", "loop")
_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_KEY = re.compile(r"^([A-Za-z_][A-Za-z_0-9]*)((?:\[\s*\d+\s*\])*)$")


class FamilyFileError(ValueError):
    """Malformed family file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}".strip())
        self.line = line
        self.path = path


@dataclass
class FamilyFile:
    sections: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    path: str | None = None

    def has(self, name: str) -> bool:
        return name in self.sections

    def _error(self, msg, section=None, key=None):
        return FamilyFileError(msg, self.lines.get((section, key)), self.path)

    def _section(self, name: str) -> dict:
        if name not in self.sections:
            raise FamilyFileError(f"missing [{name}] section", None, self.path)
        return self.sections[name]

    def _int(self, section: str, key: str, default=None) -> int:
        sec = self._section(section)
        if key not in sec:
            if default is None:
                raise self._error(f"[{section}] needs '{key}'", section)
            return default
        try:
            return int(sec[key])
        except ValueError:
            raise self._error(f"'{key}' must be an integer, got {sec[key]!r}", section, key) from None

    def _float(self, section: str, key: str, default: float) -> float:
        sec = self._section(section)
        if key not in sec:
            return default
        try:
            return float(sec[key])
        except ValueError:
            raise self._error(f"'{key}' must be a number, got {sec[key]!r}", section, key) from None

    def _matrix(self, section: str, name: str, size: int, default=None) -> list[list[str]]:
        sec = self._section(section)
        out = [[default] * size for _ in range(size)]
        for key, val in sec.items():
            if not key.startswith(name + "["):
                continue
            idx = _indices(key)
            if len(idx) != 2:
                raise self._error(f"'{key}' needs two indices", section, key)
            i, j = idx
            if not (1 <= i <= size and 1 <= j <= size):
                raise self._error(f"index of '{key}' outside 1..{size}", section, key)
            out[i - 1][j - 1] = val
        for i in range(size):
            for j in range(size):
                if out[i][j] is None:
                    raise FamilyFileError(f"[{section}] is missing {name}[{i + 1}][{j + 1}]", None, self.path)
        return out

    def _parse_entries(self, section, name, mat, names):
        out = []
        for i, row in enumerate(mat):
            parsed = []
            for j, src in enumerate(row):
                key = f"{name}[{i + 1}][{j + 1}]"
                try:
                    parsed.append(E.parse(src, names))
                except E.ExprSyntaxError as exc:
                    raise self._error(f"{key}: {exc}", section, key) from None
            out.append(parsed)
        return out

    # ------------------------------------------------------------------

    def symbol_family(self) -> SymbolFamily:
        q = self._int("problem", "q")
        n = self._int("problem", "n")
        m = self._int("problem", "m")
        k = self._int("problem", "k", 0)
        mode = self.sections["problem"].get("mode", "principal")
        names = E.declared_variables(q, n, 0, t=False)
        inf_names = [v for v in names if not v.startswith("l")]
        default_inf = None if mode == "principal" else "identity"
        entries = self._parse_entries("symbol", "p", self._matrix("symbol", "p", m), names)
        inf = self._matrix("symbol", "infinity", m, default=default_inf)
        inf = [[("1" if i == j else "0") if v == "identity" else v for j, v in enumerate(row)] for i, row in enumerate(inf)]
        inf = self._parse_entries("symbol", "infinity", inf, inf_names)
        try:
            return SymbolFamily(
                q, n, m, k, entries, inf,
                support_radius=self._float("problem", "support_radius", 1.0),
                lambda_radius=self._float("problem", "lambda_radius", 4.0),
                mode=mode,
                source={"path": self.path},
            )
        except ValueError as exc:
            raise FamilyFileError(str(exc), None, self.path) from None

    def finite_family(self) -> FiniteFamily:
        sec = self._section("finite_family")
        q = self._int("finite_family", "q")
        N = self._int("finite_family", "N")
        names = [f"l{j + 1}" for j in range(q)] + [f"u{j + 1}" for j in range(N)]
        comps = [None] * N
        for key, val in sec.items():
            if key.startswith("f["):
                idx = _indices(key)
                if len(idx) != 1 or not 1 <= idx[0] <= N:
                    raise self._error(f"bad component index in '{key}'", "finite_family", key)
                try:
                    comps[idx[0] - 1] = E.parse(val, names)
                except E.ExprSyntaxError as exc:
                    raise self._error(f"{key}: {exc}", "finite_family", key) from None
        missing = [i + 1 for i, c in enumerate(comps) if c is None]
        if missing:
            raise FamilyFileError(f"[finite_family] is missing f[{missing[0]}]", None, self.path)
        fam = FiniteFamily.from_expressions(q, N, comps)
        if fam.check_trivial_branch() > 1e-12:
            raise FamilyFileError("[finite_family] violates f(lambda, 0) = 0", None, self.path)
        return fam

    def lambda0(self) -> np.ndarray | None:
        sec = self.sections.get("finite_family", {})
        if "lambda0" not in sec:
            return None
        return parse_vector(sec["lambda0"])

    def disk_radius(self, default: float = 0.5) -> float:
        if "finite_family" not in self.sections:
            return default
        return self._float("finite_family", "disk_radius", default)

    def quadrature_spec(self, base: QuadratureSpec | None = None) -> QuadratureSpec:
        spec = base or QuadratureSpec()
        sec = self.sections.get("quadrature", {})
        kinds = {"order": int, "periodic_points": int, "samples": int, "seed": int, "replicates": int,
                 "refinement_levels": int, "scheme": str, "sampler": str}
        kw = {}
        for key, val in sec.items():
            if key not in kinds:
                raise self._error(f"unknown quadrature key '{key}'", "quadrature", key)
            try:
                kw[key] = kinds[key](val)
            except ValueError:
                raise self._error(f"bad value for '{key}': {val!r}", "quadrature", key) from None
        try:
            return replace(spec, **kw)
        except ValueError as exc:
            raise FamilyFileError(str(exc), None, self.path) from None

    def _t_matrix(self, section: str, name: str, size_key: str):
        size = self._int(section, size_key)
        mat = self._parse_entries(section, name, self._matrix(section, name, size), ["t"])

        def at(t):
            t = np.asarray(t, dtype=float)
            out = np.empty(t.shape + (size, size), dtype=complex)
            for i in range(size):
                for j in range(size):
                    out[..., i, j] = E.evaluate(mat[i][j], {"t": t})
            return out

        return at

    def path_matrix(self):
        """t ↦ real N×N matrix for the parity oracle."""
        at = self._t_matrix("path", "a", "N")
        return lambda t: at(t).real

    def loop_matrix(self):
        """Array of angles ↦ stack of complex m×m matrices for the winding oracle."""
        return self._t_matrix("loop", "g", "m")


def _indices(key: str) -> list[int]:
    return [int(v) for v in re.findall(r"\[\s*(\d+)\s*\]", key)]


def parse_vector(text: str) -> np.ndarray:
    parts = [p for p in re.split(r"[,\s]+", str(text).strip()) if p]
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise FamilyFileError(f"not a list of numbers: {text!r}") from None


def _value(raw: str, lineno: int, path) -> str:
    raw = raw.strip()
    if raw.startswith('"'):
        end = raw.find('"', 1)
        if end < 0:
            raise FamilyFileError("unterminated string", lineno, path)
        rest = raw[end + 1:].strip()
        if rest and not rest.startswith("#"):
            raise FamilyFileError(f"unexpected text after string: {rest!r}", lineno, path)
        return raw[1:end]
    val = raw.split("#", 1)[0].strip()
    if not val:
        raise FamilyFileError("missing value", lineno, path)
    return val


def parse_family_text(text: str, path: str | None = None) -> FamilyFile:
    ff = FamilyFile(path=path)
    current = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        m = _SECTION.match(s.split("#", 1)[0].strip())
        if m:
            current = m.group(1)
            if current not in SECTIONS:
                raise FamilyFileError(f"unknown section [{current}]", lineno, path)
            if current in ff.sections:
                raise FamilyFileError(f"duplicate section [{current}]", lineno, path)
            ff.sections[current] = {}
            continue
        if "=" not in s:
            raise FamilyFileError(f"expected 'key = value', got {s!r}", lineno, path)
        if current is None:
            raise FamilyFileError("key outside of any section", lineno, path)
        key, raw = s.split("=", 1)
        key = re.sub(r"\s+", "", key)
        if not _KEY.match(key):
            raise FamilyFileError(f"bad key {key!r}", lineno, path)
        if key in ff.sections[current]:
            raise FamilyFileError(f"duplicate key {key!r}", lineno, path)
        ff.sections[current][key] = _value(raw, lineno, path)
        ff.lines[(current, key)] = lineno
    return ff


def read_family_file(path) -> FamilyFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise FamilyFileError(f"cannot read file: {exc.strerror}", None, str(p)) from None
    return parse_family_text(text, str(p))
