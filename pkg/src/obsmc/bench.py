"""Builtin benchmark program generators.

Each generator is a pure function of its parameters and returns DSL
source text, byte-identical across runs.  `materialize` writes the
bundled corpus under a directory.
"""

from __future__ import annotations

from typing import Callable


def p2wr(_: int = 0) -> str:
    return wr_grid(2)


def wr_grid(k: int) -> str:
    """k processes, each writing x then reading it back."""
    parts = ["global x = 0", ""]
    for j in range(1, k + 1):
        parts += [f"process p{j} {{", f"  write x = {j}", "  r = read x", "}", ""]
    return "\n".join(parts)


def wr_chain(n: int) -> str:
    """Two processes, n writes to x then one read each."""
    parts = ["global x = 0", ""]
    for j in (1, 2):
        parts.append(f"process p{j} {{")
        for i in range(1, n + 1):
            parts.append(f"  write x = {10 * j + i}")
        parts += ["  r = read x", "}", ""]
    return "\n".join(parts)


def cyclic3(n: int) -> str:
    """Three processes on x and y whose communication graph is a triangle."""
    parts = ["global x = 0", "global y = 0", ""]
    parts += ["process p1 {", "  write x = 1", "  rx = read x", "}", ""]
    for j in (2, 3):
        parts.append(f"process p{j} {{")
        parts.append(f"  write x = {j}")
        for i in range(n + 1):
            parts.append(f"  write y = {10 * j + i}")
        parts += ["  ry = read y", "  rx = read x", "}", ""]
    return "\n".join(parts)


def withdraw(_: int = 0) -> str:
    """Two bank-account withdrawals behind one lock; both can succeed."""
    parts = ["global balance = 4", "lock l", ""]
    for j, amount in ((1, 1), (2, 2)):
        parts += [
            f"process p{j} {{",
            f"  local amount = {amount}",
            "  local success = 0",
            "  acquire l",
            "  v = read balance",
            "  if 0 <= v - amount {",
            "    write balance = v - amount",
            "    local success = 1",
            "  } else {",
            "  }",
            "  release l",
            "  v2 = read balance",
            "}",
            "",
        ]
    return "\n".join(parts)


def lastzero(n: int) -> str:
    """One reader scanning an array for the last zero, n writers."""
    parts = [f"global array[{n + 1}] = 0", ""]
    lines = ["process p0 {", f"  local i = {n}"]

    def scan(depth: int, pad: str) -> None:
        lines.append(f"{pad}v = read array[i]")
        if depth == 0:
            return
        lines.append(f"{pad}if v != 0 {{")
        lines.append(f"{pad}  local i = i - 1")
        scan(depth - 1, pad + "  ")
        lines.append(f"{pad}}}")

    scan(n, "  ")
    lines.append("}")
    parts += lines + [""]
    for j in range(1, n + 1):
        parts += [
            f"process p{j} {{",
            f"  v = read array[{j - 1}]",
            f"  write array[{j}] = v + 1",
            "}",
            "",
        ]
    return "\n".join(parts)


def opt_lock(n: int) -> str:
    """Two processes optimistically updating x, up to n attempts each."""
    parts = ["global last_id = 0", "global x = 0", ""]
    for j in (1, 2):
        lines = [f"process p{j} {{"]

        def attempt(k: int, pad: str) -> None:
            lines.append(f"{pad}write last_id = {j}")
            lines.append(f"{pad}write x = {100 + j}")
            lines.append(f"{pad}v = read last_id")
            if k > 1:
                lines.append(f"{pad}if v != {j} {{")
                attempt(k - 1, pad + "  ")
                lines.append(f"{pad}}}")

        attempt(n, "  ")
        lines.append("}")
        parts += lines + [""]
    return "\n".join(parts)


GENERATORS: dict[str, Callable[[int], str]] = {
    "p2wr": p2wr,
    "wr_chain": wr_chain,
    "wr_grid": wr_grid,
    "cyclic3": cyclic3,
    "withdraw": withdraw,
    "lastzero": lastzero,
    "opt_lock": opt_lock,
}

# Default parameter used when a generator is materialized without one.
DEFAULT_PARAM = {
    "p2wr": 0,
    "wr_chain": 3,
    "wr_grid": 3,
    "cyclic3": 1,
    "withdraw": 0,
    "lastzero": 2,
    "opt_lock": 2,
}


def generate(name: str, param: int | None = None) -> str:
    if name not in GENERATORS:
        raise KeyError(f"unknown benchmark {name!r}; known: {', '.join(sorted(GENERATORS))}")
    if param is None:
        param = DEFAULT_PARAM[name]
    return GENERATORS[name](param)


def bench_label(name: str, param: int | None) -> str:
    if param is None:
        param = DEFAULT_PARAM[name]
    return name if name in ("p2wr", "withdraw") else f"{name}({param})"
