"""Verdict lines collected by the acceptance suite, printed at session end."""

LINES: list[str] = []


def verdict(number, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    LINES.append(line)
    print(line)
    return line
