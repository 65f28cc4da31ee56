import time

_START = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    elapsed = time.perf_counter() - _START
    verdict = "PASS" if elapsed < 60.0 else "FAIL"
    terminalreporter.write_line(f"[suite runtime] {verdict}: {elapsed:.1f} s (limit 60 s)")
