import pytest


def pytest_addoption(parser):
    group = parser.getgroup("mosbelief")
    group.addoption(
        "--semantickitti-root",
        default=None,
        help="dataset root containing sequences/08 (velodyne, labels, poses.txt)",
    )
    group.addoption(
        "--semantickitti-logits",
        default=None,
        help="directory of <scan:06>.logits files for sequence 08 from a pretrained model",
    )
    group.addoption(
        "--strict-performance",
        action="store_true",
        help="fail (rather than only report) when the belief update timing budget is exceeded",
    )


@pytest.fixture
def semantickitti(request):
    root = request.config.getoption("--semantickitti-root")
    logits = request.config.getoption("--semantickitti-logits")
    if not root or not logits:
        pytest.skip("pass --semantickitti-root and --semantickitti-logits to run")
    return root, logits


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): acceptance criterion number")
    config._acceptance_lines = []


@pytest.fixture
def report(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def _report(number: int, passed: bool, detail: str):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
