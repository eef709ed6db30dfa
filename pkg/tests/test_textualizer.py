from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

import goldens
from epicast.data.assemble import assemble_dataset
from epicast.data.types import POLICY_IDS, GenomicRecord, PolicyRecord
from epicast.errors import RankOutOfRange, UnknownPolicyLevel, WindowTooShort
from epicast.neural.tokenizer import SPECIAL_TOKEN, split_tokens
from epicast.targets import HtcClass
from epicast.textualizer import (ANSWER_SUFFIX, assemble_prompt, genomic_text, policy_text, rank_label,
                                 series_narrative)


@pytest.mark.parametrize("case", goldens.CASES, ids=[c[0] for c in goldens.CASES])
def test_golden_prompts(case, fixture_panels):
    doc = goldens.render(case, fixture_panels)
    assert doc.text.encode("utf-8") == goldens.golden_path(case[0]).read_bytes()


@pytest.mark.parametrize("rank,label", [
    (1, "One of the best"), (25, "Close to the national average"), (50, "One of the lowest"),
    (5, "One of the best"), (6, "Higher than the national average"),
    (20, "Higher than the national average"), (21, "Close to the national average"),
    (30, "Close to the national average"), (31, "Lower than the national average"),
    (45, "Lower than the national average"), (46, "One of the lowest"),
])
def test_rank_label(rank, label):
    assert rank_label(rank) == label


def test_rank_label_partition_sizes():
    labels = [rank_label(r) for r in range(1, 51)]
    assert [labels.count(x) for x in dict.fromkeys(labels)] == [5, 15, 10, 15, 5]


@pytest.mark.parametrize("rank,n", [(0, 50), (51, 50), (5, 4)])
def test_rank_out_of_range(rank, n):
    with pytest.raises(RankOutOfRange):
        rank_label(rank, n)


def test_rank_label_rescales_small_panels():
    # rank r of N sits at ceil(50 r / N) on the canonical scale
    assert [rank_label(r, 4) for r in range(1, 5)] == [
        rank_label(13), rank_label(25), rank_label(38), rank_label(50)]
    assert [rank_label(r, 100) for r in (10, 11)] == ["One of the best", "Higher than the national average"]


def _policies(**levels):
    return [PolicyRecord(pid, levels.get(pid, 0)) for pid in POLICY_IDS]


def test_policy_changes():
    text = " ".join(policy_text(_policies(C1=0), _policies(C1=1)))
    assert "school policy moving from recommend closing to no measures" in text
    assert "gathering policy remains no measures" in text


def test_policy_unchanged_and_first_week():
    assert sum("remains" in s for s in policy_text(_policies(C2=2), _policies(C2=2))) == 5
    assert sum("remains" in s for s in policy_text(_policies(C3=1), None)) == 5


def test_policy_unknown_level():
    with pytest.raises(UnknownPolicyLevel):
        policy_text(_policies(C1=4), None)


def test_series_narrative_examples():
    assert series_narrative([5, 5, 5, 5]).endswith("remained stable over the recent weeks.")
    assert "increased" in series_narrative([1, 2, 3, 4])
    assert "decreased" in series_narrative([9, 7, 5, 3])
    with pytest.raises(WindowTooShort):
        series_narrative([1, 2, 3])


@given(st.lists(st.floats(0.1, 1e3), min_size=4, max_size=12))
def test_series_narrative_scale_free(values):
    assert series_narrative(values) == series_narrative([10 * v for v in values])


def _variant(name, share, rising=True):
    props = (share / 4, share / 3, share / 2, share) if rising else (share,) * 4
    return GenomicRecord(name, "higher", "comparable", "higher", props)


def test_genomic_text():
    assert genomic_text([_variant("X", 0.6)], include=False) == ""
    text = genomic_text([_variant("X", 0.6)])
    for phrase in ("higher infectiousness", "comparable severity", "higher immune resistance", "increased"):
        assert phrase in text
    assert "Y" not in genomic_text([_variant("X", 0.6), _variant("Y", 0.005, rising=False)]).split()


def test_genomic_toggle_changes_one_paragraph(fixture_panels):
    rec = assemble_dataset(fixture_panels)[-1]
    on = assemble_prompt(replace(rec, include_genomic=True), 1).text.split("\n\n")
    off = assemble_prompt(replace(rec, include_genomic=False), 1).text.split("\n\n")
    assert len(on) == len(off) + 1
    gen = [p for p in on if p.startswith("Genomic")]
    assert len(gen) == 1
    assert [p for p in on if p not in gen] == off


def test_prompt_invariants(fixture_panels):
    for rec in assemble_dataset(fixture_panels):
        for h in (1, 3):
            doc = assemble_prompt(rec, h, HtcClass.STABLE)
            tokens = split_tokens(doc.text)
            assert tokens.count(SPECIAL_TOKEN) == 1
            assert tokens[doc.special_token_index - 1] == SPECIAL_TOKEN
            assert 250 <= doc.word_count <= 400
            assert doc.text.count(ANSWER_SUFFIX) == 1
            assert doc.prompt.endswith(ANSWER_SUFFIX)
            assert doc.text.endswith("<Stable>")


def test_prompt_deterministic(fixture_panels):
    rec = assemble_dataset(fixture_panels)[5]
    assert assemble_prompt(rec, 3).text == assemble_prompt(rec, 3).text
