"""Integer sequences used as multipliers k_i and pseudo-norm digits d_i.

Sequences are 1-indexed and possibly infinite. They are described by small
JSON-friendly specs:

* ``{"list": [10, 100, 1000]}`` (finite)
* ``{"geometric": 10}``: 10, 100, 1000, ...
* ``{"constant": p}``: p, p, p, ...
* ``{"double_exponential": 2}``: 2**(2**i) for i >= 1, i.e. 4, 16, 256, ...
* ``{"products": <spec>}``: partial products D_i = d_1 * ... * d_i of another sequence
"""
from __future__ import annotations

from .errors import ConfigError


class Seq:
    def __init__(self, spec):
        if isinstance(spec, Seq):
            spec = spec.spec
        if isinstance(spec, (list, tuple)):
            spec = {"list": list(spec)}
        if isinstance(spec, str):
            spec = _parse_text(spec)
        if not isinstance(spec, dict) or len(spec) != 1:
            raise ConfigError(f"bad sequence spec {spec!r}")
        self.spec = spec
        (self.kind, self.arg), = spec.items()
        if self.kind not in ("list", "geometric", "constant", "double_exponential", "products"):
            raise ConfigError(f"unknown sequence kind {self.kind!r}")
        if self.kind == "list":
            self.arg = [int(x) for x in self.arg]
            if any(x < 1 for x in self.arg):
                raise ConfigError("sequence terms must be positive integers")
        elif self.kind == "products":
            self.arg = Seq(self.arg)
        else:
            self.arg = int(self.arg)
            if self.arg < 1:
                raise ConfigError("sequence parameter must be a positive integer")
        self._cache: list[int] = []

    @property
    def finite(self) -> bool:
        if self.kind == "list":
            return True
        if self.kind == "products":
            return self.arg.finite
        return False

    def __len__(self):
        if self.kind == "list":
            return len(self.arg)
        if self.kind == "products":
            return len(self.arg)
        raise TypeError("infinite sequence")

    def __getitem__(self, i: int) -> int:
        """The i-th term, i >= 1."""
        if i < 1:
            raise IndexError("sequences are 1-indexed")
        if self.kind == "list":
            if i > len(self.arg):
                raise IndexError(i)
            return self.arg[i - 1]
        if self.kind == "geometric":
            return self.arg ** i
        if self.kind == "constant":
            return self.arg
        if self.kind == "double_exponential":
            return self.arg ** (2 ** i)
        while len(self._cache) < i:
            j = len(self._cache) + 1
            prev = self._cache[-1] if self._cache else 1
            self._cache.append(prev * self.arg[j])
        return self._cache[i - 1]

    def terms(self, limit: int | None = None):
        """Iterate terms, stopping at `limit` terms or at the end of a finite list."""
        i = 1
        while limit is None or i <= limit:
            try:
                yield self[i]
            except IndexError:
                return
            i += 1

    def to_json(self):
        if self.kind == "products":
            return {"products": self.arg.to_json()}
        return {self.kind: self.arg}

    def __repr__(self):
        return f"Seq({self.to_json()})"


def _parse_text(text: str) -> dict:
    """'10,100,1000' | 'geometric:10' | 'constant:2' | 'double_exponential:2' | 'products:geometric:10'."""
    text = text.strip()
    if ":" in text:
        kind, rest = text.split(":", 1)
        if kind == "products":
            return {"products": _parse_text(rest)}
        if kind == "list":
            return {"list": [int(x) for x in rest.split(",") if x]}
        return {kind: int(rest)}
    try:
        return {"list": [int(x) for x in text.split(",") if x]}
    except ValueError as exc:
        raise ConfigError(f"cannot parse sequence {text!r}") from exc
