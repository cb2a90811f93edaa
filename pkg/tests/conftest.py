import sys
from pathlib import Path

import pytest

from offsetforge.corpus import CorpusSpec, generate_corpus

sys.path.insert(0, str(Path(__file__).parent))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def sdf_record(name, props, body=b"  body line\n", nl=b"\n"):
    """Hand-built SDF record; ``props`` is a list of (name, value-lines)."""
    lines = [name.encode(), b"  hand", b""]
    lines += body.rstrip(b"\n").split(b"\n") if body else []
    lines.append(b"M  END")
    for pname, value in props:
        lines.append(f"> <{pname}>".encode())
        lines += [v.encode() for v in value]
        lines.append(b"")
    lines.append(b"$$$$")
    return nl.join(lines) + nl


@pytest.fixture
def make_corpus(tmp_path):
    counter = iter(range(10_000))

    def make(**kw):
        spec = CorpusSpec(**kw)
        out = tmp_path / f"corpus{next(counter)}"
        manifest = generate_corpus(spec, out)
        return out, manifest

    return make
