from manet_ddos.topology import build_topology

ACCEPTANCE_LINES: list[str] = []


def line_topology(n: int, spacing: float = 200.0, radio_range: float = 250.0):
    """Nodes 0..n-1 on a line; only consecutive nodes are in range."""
    return build_topology([(i, i * spacing, 0.0) for i in range(n)], radio_range)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
