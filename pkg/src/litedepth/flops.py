"""Analytic multiply-accumulate counting.

Ops report their exact MAC count (a pure function of shapes) into the
active counter, attributed to the innermost named scope. Elementwise
activations and normalizations are excluded by convention; FFTs are
counted as 2.5*N*log2(N) MAC-equivalents per plane so that the reported
FLOPs = 2*MACs figure matches the usual 5*N*log2(N) real-op convention.
"""

from __future__ import annotations

from contextlib import contextmanager

_active: list["MacCounter"] = []


class MacCounter:
    """Collects per-scope and per-op-kind MAC counts during a forward pass."""

    def __init__(self):
        self.by_scope: dict[str, int] = {}
        self.by_kind: dict[str, int] = {}
        self._scopes: list[str] = []

    @property
    def total_macs(self) -> int:
        return sum(self.by_scope.values())

    def add(self, macs: int, kind: str):
        scope = self._scopes[-1] if self._scopes else "(root)"
        self.by_scope[scope] = self.by_scope.get(scope, 0) + int(macs)
        self.by_kind[kind] = self.by_kind.get(kind, 0) + int(macs)

    @contextmanager
    def scope(self, name: str):
        self._scopes.append(name)
        try:
            yield
        finally:
            self._scopes.pop()

    def __enter__(self):
        _active.append(self)
        return self

    def __exit__(self, *exc):
        _active.pop()
        return False


def add_macs(macs: int, kind: str):
    if _active:
        _active[-1].add(macs, kind)


@contextmanager
def scope(name: str):
    if _active:
        with _active[-1].scope(name):
            yield
    else:
        yield
