"""One test per acceptance criterion; each prints a single PASS/FAIL line."""
import json

import pytest

from laguerre_edge.acceptance import CRITERIA, format_line, load_manifest, run_criterion

MANIFEST = load_manifest()


def _check(number, capsys):
    result = run_criterion(number, MANIFEST)
    with capsys.disabled():
        print("\n" + format_line(result))
    assert result.passed, json.dumps(result.details, default=float, indent=1)


def test_manifest_covers_every_criterion():
    assert [c[0] for c in CRITERIA] == list(range(1, 10))
    for _, key, _, _ in CRITERIA:
        assert key in MANIFEST


def test_criterion_1_oracle_equivalence(capsys):
    _check(1, capsys)


def test_criterion_2_geometry_identities(capsys):
    _check(2, capsys)


def test_criterion_3_clt_desk_scale(capsys):
    _check(3, capsys)


def test_criterion_4_variance_lemma(capsys):
    _check(4, capsys)


def test_criterion_5_a0_lemma(capsys):
    _check(5, capsys)


def test_criterion_6_uniform_r_bound(capsys):
    _check(6, capsys)


def test_criterion_7_mp_bulk(capsys):
    _check(7, capsys)


def test_criterion_8_subgamma_tails(capsys):
    _check(8, capsys)


def test_criterion_9_determinism(capsys):
    _check(9, capsys)
