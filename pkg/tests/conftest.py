from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
GOLDEN = FIXTURES / "golden"
SNAPSHOTS = FIXTURES / "snapshots"
SOURCE_DATE, TARGET_DATE = "2020-11-20", "2021-06-01"

sys.path.insert(0, str(TESTS))

# one shared CPU makes wall-clock deadlines meaningless
settings.register_profile("repo", deadline=None)
settings.load_profile("repo")


def _parse_dir(directory: Path, date: str):
    from wikiupdate.text import normalize_title
    from wikiupdate.wikitext import parse_wikitext_subset

    out = {}
    for f in sorted(directory.glob("*.wiki")):
        page_id = normalize_title(f.stem)
        out[page_id] = parse_wikitext_subset(f.read_text(encoding="utf-8"), page_id, page_id, date)
    return out


@pytest.fixture(scope="session")
def source_pages():
    return _parse_dir(SNAPSHOTS / "source", SOURCE_DATE)


@pytest.fixture(scope="session")
def target_pages():
    return _parse_dir(SNAPSHOTS / "target", TARGET_DATE)


@pytest.fixture(scope="session")
def golden_instances():
    from wikiupdate.pipeline import read_instances

    return list(read_instances(GOLDEN / "instances.jsonl"))


@pytest.fixture(scope="session")
def by_page(golden_instances):
    return {i.page_id: i for i in golden_instances}


@pytest.fixture(scope="session")
def synth30():
    from wikiupdate.pipeline import read_instances

    return list(read_instances(GOLDEN / "synth30_instances.jsonl"))


def make_instance(source, target, evidence=(), support=None, added=("X",), instance_id="Test@2020-01-01->2021-01-01"):
    """Instance from plain sentence lists; alignment is computed, support given."""
    from wikiupdate.diff import align_sentences
    from wikiupdate.models import Sentence
    from wikiupdate.pipeline import UpdateInstance

    s = tuple(Sentence(t, i) for i, t in enumerate(source))
    t = tuple(Sentence(x, i) for i, x in enumerate(target))
    alignments, removed = align_sentences(s, t)
    return UpdateInstance(instance_id, s, t, tuple(alignments), tuple(removed), tuple(evidence),
                          dict(support or {}), frozenset(added))


def text_item(i, origin, text, heading=("Body",), targets=()):
    from wikiupdate.diff import EvidenceItem, Kind
    from wikiupdate.models import Mention

    mentions = []
    for name in targets:
        k = text.index(name)
        mentions.append(Mention(name, k, k + len(name), name))
    return EvidenceItem(i, origin, origin, tuple(heading), Kind.TEXT, text, tuple(mentions))


# --- acceptance summary ----------------------------------------------------

ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """``with criterion(n, title):`` records PASS, or FAIL if the block raises."""
    from contextlib import contextmanager

    results = request.config.stash[ACCEPTANCE]

    @contextmanager
    def run(n, title):
        results[n] = f"FAIL  {n}. {title}"
        yield
        results[n] = f"PASS  {n}. {title}"

    return run


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
