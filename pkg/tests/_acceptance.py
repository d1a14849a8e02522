"""Registry of acceptance outcomes, printed again at the end of the pytest run."""
LINES: list[str] = []


def report(number: int, ok: bool, detail: str, elapsed: float | None = None) -> str:
    timing = f" [{elapsed:.1f}s]" if elapsed is not None else ""
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}{timing}"
    print(line)
    LINES.append(line)
    return line
