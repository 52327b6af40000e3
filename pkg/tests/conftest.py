import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA: list[str] = []


def record_criterion(number: int, passed: bool, detail: str, seconds: float) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  ({seconds:.1f} s)  {detail}"
    _CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
