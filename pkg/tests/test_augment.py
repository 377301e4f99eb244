import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _fixtures import synthetic_reports
from medtri.augment import (
    CounterfactualConfig,
    DonorPool,
    EmitSummary,
    KnowledgeDictionary,
    KnowledgeEntry,
    default_dictionary,
    emit_hard_negative_set,
    expand_knowledge,
    generate_counterfactual,
    report_rng,
)
from medtri.errors import InsufficientEligibleEntities, KnowledgeError, NoDonorAtLevel
from medtri.ontology import default_ontology
from medtri.schema import NormalizedReport, Segment, SegmentKind, Triplet, parse_report, serialize_report

ONTO = default_ontology()
SIGNATURE = "parenchymal consolidation or high-attenuation opacity within the affected lobe"
ALL_KINDS = frozenset(SegmentKind)


def rep(rid, text):
    return NormalizedReport(rid, tuple(parse_report(text)))


A = rep("A", "Lung: clear.\nHeart: normal size.\nAorta: calcified.")
B = rep("B", "Lung: bilateral effusions.\nHeart: enlarged.")


# -- knowledge expansion -------------------------------------------------------------------


def pneumonia_report(kind=SegmentKind.DIAGNOSIS):
    trip = Triplet("Lung", (Segment("patchy opacity", SegmentKind.DESCRIPTION), Segment("pneumonia", kind)))
    return NormalizedReport("p", (trip,))


def test_pneumonia_signature_appended_after_match():
    out = expand_knowledge(pneumonia_report())
    assert out.triplets[0].texts == ("patchy opacity", "pneumonia", SIGNATURE)
    assert out.to_text().count(SIGNATURE) == 1


def test_unspecified_kind_is_opt_in():
    r = rep("p", "Lung: patchy opacity; pneumonia.")
    assert expand_knowledge(r) is r
    out = expand_knowledge(r, kinds={SegmentKind.DIAGNOSIS, SegmentKind.UNSPECIFIED})
    assert out.triplets[0].texts == ("patchy opacity", "pneumonia", SIGNATURE)


def test_no_term_is_noop():
    assert expand_knowledge(A, kinds=ALL_KINDS) is A


def test_signature_once_per_triplet():
    r = rep("p", "Lung: consistent with pneumonia; may reflect pneumonia; compatible with bronchopneumonia.")
    out = expand_knowledge(r)
    assert out.triplets[0].texts.count(SIGNATURE) == 1
    assert out.triplets[0].texts[1] == SIGNATURE


def test_whole_word_and_longest_match():
    d = KnowledgeDictionary([
        KnowledgeEntry("emphysema", (), "sig one"),
        KnowledgeEntry("pleural effusion", ("effusion",), "sig two"),
    ])
    r = NormalizedReport("x", (Triplet("Lung", (Segment("pseudoemphysematous change", SegmentKind.DIAGNOSIS),)),))
    assert expand_knowledge(r, d) is r
    assert d.match("small left pleural effusion").term == "pleural effusion"


def test_signature_in_two_triplets():
    r = NormalizedReport("x", (
        Triplet("Lung", (Segment("pneumonia", SegmentKind.DIAGNOSIS),)),
        Triplet("Left lower lobe", (Segment("consistent with pneumonia", SegmentKind.DIAGNOSIS),)),
    ))
    out = expand_knowledge(r)
    assert [t.texts.count(SIGNATURE) for t in out.triplets] == [1, 1]


def test_dictionary_validation():
    with pytest.raises(KnowledgeError):
        KnowledgeDictionary([KnowledgeEntry("a", (), "two; clauses")])
    with pytest.raises(KnowledgeError):
        KnowledgeDictionary([KnowledgeEntry("a", (), "ends with a period.")])
    with pytest.raises(KnowledgeError):
        KnowledgeDictionary([KnowledgeEntry("a", (), "x"), KnowledgeEntry("b", ("A",), "y")])
    assert len(default_dictionary()) >= 20


def is_subsequence(small, big):
    it = iter(big)
    return all(any(x == y for y in it) for x in small)


TERMS = [e.term for e in default_dictionary().entries] + ["clear", "normal size", "stable"]


@st.composite
def knowledge_reports(draw):
    ents = draw(st.lists(st.sampled_from(["Lung", "Heart", "Aorta", "Bronchi", "Liver"]), min_size=1, max_size=4, unique=True))
    ents.sort(key=lambda e: ONTO.resolve(e).order_index)
    trips = []
    for e in ents:
        segs = draw(st.lists(
            st.tuples(st.sampled_from(["", "consistent with ", "mild ", "no "]), st.sampled_from(TERMS),
                      st.sampled_from(list(SegmentKind))),
            min_size=1, max_size=4))
        trips.append(Triplet(e, tuple(Segment(p + t, k) for p, t, k in segs)))
    return NormalizedReport("k", tuple(trips))


@settings(max_examples=1000, deadline=None)
@given(knowledge_reports(), st.sampled_from([frozenset({SegmentKind.DIAGNOSIS}), ALL_KINDS]))
def test_knowledge_idempotent_and_monotone(r, kinds):
    once = expand_knowledge(r, kinds=kinds)
    assert expand_knowledge(once, kinds=kinds) == once
    for before, after in zip(r.triplets, once.triplets):
        assert after.entity == before.entity
        assert is_subsequence(before.segments, after.segments)
        sigs = [s.text for s in after.segments if default_dictionary().is_signature(s.text)]
        assert len(sigs) == len(set(sigs))
    # expanded text still parses and round-trips
    assert serialize_report(parse_report(once.to_text())) == once.to_text()


# -- counterfactuals --------------------------------------------------------------------------


def outcomes_by_enumeration(report, donors, n):
    """Every (targets x donors) outcome allowed by the contract, as counterfactual texts."""
    level = lambda t: ONTO.resolve(t.entity).level
    out = set()
    trips = report.triplets
    for targets in itertools.combinations(range(len(trips)), n):
        choices = []
        for i in targets:
            choices.append([
                d for d in donors for d in d.triplets
                if level(d) == level(trips[i]) and d.texts != trips[i].texts
            ])
        for picks in itertools.product(*choices):
            new = list(trips)
            for i, d in zip(targets, picks):
                new[i] = Triplet(trips[i].entity, d.segments)
            out.add(serialize_report(new))
    return out


def test_ab_example_against_enumeration():
    pool = DonorPool([B])
    allowed = outcomes_by_enumeration(A, [B], 2)
    assert len(allowed) == 12
    seen = Counter()
    for seed in range(600):
        rec = generate_counterfactual(A, CounterfactualConfig(2, seed), ONTO, pool)
        assert rec.counterfactual_text in allowed
        new = parse_report(rec.counterfactual_text)
        assert [t.entity for t in new] == A.entities
        changed = [a.texts != b.texts for a, b in zip(A.triplets, new)]
        assert sum(changed) == 2
        carried = {t.texts for t in B.triplets}
        assert all(t.texts in carried for t, c in zip(new, changed) if c)
        seen[rec.counterfactual_text] += 1
    # every outcome is reachable and none dominates (expected 50 each)
    assert set(seen) == allowed
    assert max(seen.values()) < 90 and min(seen.values()) > 20


def test_seeded_draw_is_deterministic():
    pool = DonorPool([A, B])
    cfg = CounterfactualConfig(2, 17)
    a = generate_counterfactual(A, cfg, ONTO, pool)
    assert generate_counterfactual(A, cfg, ONTO, DonorPool([A, B])) == a
    assert a.rng_seed == 17 and a.label == "negative"


def test_rng_independent_of_order():
    r1 = report_rng(5, "A").integers(1 << 30, size=4)
    report_rng(5, "B").integers(1 << 30, size=100)
    assert (report_rng(5, "A").integers(1 << 30, size=4) == r1).all()
    assert not (report_rng(6, "A").integers(1 << 30, size=4) == r1).all()


def test_insufficient_entities():
    single = rep("S", "Lung: clear.\nWidget: odd.")
    with pytest.raises(InsufficientEligibleEntities):
        generate_counterfactual(single, CounterfactualConfig(2), ONTO, DonorPool([B]))
    # with resolution not required the unresolved entity becomes eligible, but has no donor
    with pytest.raises(NoDonorAtLevel):
        generate_counterfactual(single, CounterfactualConfig(2, 0, False), ONTO, DonorPool([B]))


def test_unique_level_report_is_skipped():
    odd = rep("X", "Bronchi: thickened.")
    corpus = [(r.report_id, r) for r in (A, B, odd)]
    summary = EmitSummary()
    out = list(emit_hard_negative_set(corpus, CounterfactualConfig(1, 3), ONTO, summary=summary))
    assert [r.report_id for r in out] == ["A", "B"]
    assert summary.skipped[0][:2] == ("X", "NoDonorAtLevel")
    assert "level 2" in summary.skipped[0][2]


def test_donor_excludes_same_report_and_equal_segments():
    twin = rep("T", "Lung: clear.")
    pool = DonorPool([A, twin])
    with pytest.raises(NoDonorAtLevel):
        # every level-1 donor is either from A itself or textually equal to the target
        generate_counterfactual(rep("A", "Lung: clear."), CounterfactualConfig(1), ONTO, pool)


def check_record(rec, by_id, n):
    orig = by_id[rec.report_id]
    new = parse_report(rec.counterfactual_text)
    assert rec.original_text == orig.to_text()
    assert [t.entity for t in new] == orig.entities
    diff = [i for i, (a, b) in enumerate(zip(orig.triplets, new)) if a.texts != b.texts]
    assert len(diff) == n
    assert [orig.triplets[i].entity for i in diff] == list(rec.perturbed_entities)
    for i, donor_id, donor_ent in zip(diff, rec.donor_report_ids, rec.donor_entities):
        assert donor_id != rec.report_id
        assert ONTO.resolve(donor_ent).level == ONTO.resolve(orig.triplets[i].entity).level
        donor_trip = next(t for t in by_id[donor_id].triplets if t.entity == donor_ent)
        assert new[i].texts == donor_trip.texts != orig.triplets[i].texts


def test_emit_properties_on_synthetic_corpus():
    reps = synthetic_reports(300, seed=1)
    by_id = {r.report_id: r for r in reps}
    out = list(emit_hard_negative_set(((r.report_id, r) for r in reps), CounterfactualConfig(2, 9), ONTO))
    assert len(out) == 300
    for rec in out:
        check_record(rec, by_id, 2)


def test_emit_100_all_eligible():
    reps = synthetic_reports(100, seed=2)
    out = list(emit_hard_negative_set([(r.report_id, r) for r in reps], CounterfactualConfig(2, 0), ONTO))
    assert len(out) == 100


def test_output_independent_of_input_order():
    reps = synthetic_reports(80, seed=3)
    cfg = CounterfactualConfig(2, 4)
    fwd = {r.report_id: r for r in emit_hard_negative_set([(x.report_id, x) for x in reps], cfg, ONTO)}
    pool = DonorPool(reps, ONTO)
    back = {r.report_id: r for r in emit_hard_negative_set([(x.report_id, x) for x in reps[::-1]], cfg, ONTO, pool)}
    assert fwd == back


def test_record_json_round_trip():
    from medtri.augment import HardNegativeRecord

    rec = generate_counterfactual(A, CounterfactualConfig(2, 1), ONTO, DonorPool([B]), image_ref="img/A.png")
    obj = rec.to_json()
    assert obj["schema_version"] == 1 and obj["image_ref"] == "img/A.png"
    assert HardNegativeRecord.from_json(obj) == rec


def test_uniform_target_choice():
    # with n_perturb=1 and a donor for every target, each of the 3 triplets is picked ~1/3 of the time
    pool = DonorPool([B, rep("C", "Aorta: ectatic.")])
    counts = Counter(
        generate_counterfactual(A, CounterfactualConfig(1, s), ONTO, pool).perturbed_entities[0] for s in range(900)
    )
    assert set(counts) == {"Lung", "Heart", "Aorta"}
    assert all(240 < c < 360 for c in counts.values())
    assert np.isclose(sum(counts.values()), 900)
