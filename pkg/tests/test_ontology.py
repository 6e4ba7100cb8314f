"""Ontology file parsing, merging, and templates."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from triplekit.errors import DuplicateName, EmptyInput, EmptyOntology, MalformedFile
from triplekit.ontology import (
    DEFAULT_INSTRUCTION,
    Ontology,
    default_template,
    load_ontology,
    load_ontology_dir,
    merge_ontologies,
    ontologies_by_name,
    ontology_to_json,
)


def _write(tmp_path, text, name="onto.ont"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_fixture_location_ontology(fixtures_dir):
    ontology = load_ontology(fixtures_dir / "ont" / "location.ont")
    assert ontology.name == "location"
    assert ontology.entity_types == frozenset(
        {"AdministrativeArea", "Association", "Location", "Organisation", "MedicalFacility"}
    )
    assert ontology.relation_types == frozenset(
        {"hasAdministrativeArea", "hasAssociation", "hasLocation", "hasOrganisation", "locatedNear"}
    )
    assert len(ontology.entity_types) == 5
    assert len(ontology.relation_types) == 5


def test_load_tolerates_comments_bullets_and_layouts(tmp_path):
    path = _write(
        tmp_path,
        """\
# header comment
name: mixed
entities: Alpha, Beta
  - Gamma
relations:
  - rel_one
  rel_two, rel_three
""",
    )
    ontology = load_ontology(path)
    assert ontology.entity_types == frozenset({"Alpha", "Beta", "Gamma"})
    assert ontology.relation_types == frozenset({"rel_one", "rel_two", "rel_three"})
    assert ontology.source == str(path)


@pytest.mark.parametrize(
    "text, error",
    [
        ("entities: A\nrelations: r\n", MalformedFile),  # no name
        ("name: a\nname: b\nentities: A\nrelations: r\n", MalformedFile),
        ("name:\nentities: A\nrelations: r\n", MalformedFile),
        ("stray entry\nname: a\n", MalformedFile),
        ("name: a\nentities: A, A\nrelations: r\n", DuplicateName),
        ("name: a\nentities: A\nrelations:\n", EmptyOntology),
        ("name: a\nentities:\nrelations: r\n", EmptyOntology),
    ],
)
def test_load_rejects_malformed_files(tmp_path, text, error):
    with pytest.raises(error):
        load_ontology(_write(tmp_path, text))


def test_duplicate_across_sections_is_allowed(tmp_path):
    ontology = load_ontology(_write(tmp_path, "name: a\nentities: Shared\nrelations: Shared\n"))
    assert "Shared" in ontology.entity_types
    assert "Shared" in ontology.relation_types


def test_load_dir_sorted_and_empty(tmp_path, fixtures_dir):
    loaded = load_ontology_dir(fixtures_dir / "ont")
    assert [o.name for o in loaded] == ["events", "location"]
    with pytest.raises(EmptyInput):
        load_ontology_dir(tmp_path)


def test_ontology_validation():
    with pytest.raises(EmptyOntology):
        Ontology(name=" ", entity_types=frozenset({"A"}), relation_types=frozenset({"r"}))
    with pytest.raises(EmptyOntology):
        Ontology(name="x", entity_types=frozenset(), relation_types=frozenset({"r"}))
    with pytest.raises(EmptyOntology):
        Ontology(name="x", entity_types=frozenset({"A "}), relation_types=frozenset({"r"}))


def _ont(name, entities, relations):
    return Ontology(
        name=name, entity_types=frozenset(entities), relation_types=frozenset(relations)
    )


def test_merge_unions_types():
    merged = merge_ontologies([_ont("a", {"A"}, {"r1"}), _ont("b", {"B"}, {"r2"})])
    assert merged.name == "a+b"
    assert merged.entity_types == frozenset({"A", "B"})
    assert merged.relation_types == frozenset({"r1", "r2"})
    assert merged.source == "merged[a, b]"


def test_merge_self_is_identity():
    ontology = _ont("a", {"A"}, {"r"})
    assert merge_ontologies([ontology, ontology]) == ontology
    with pytest.raises(EmptyInput):
        merge_ontologies([])


_onts = st.builds(
    _ont,
    st.sampled_from(["a", "b", "c"]),
    st.sets(st.sampled_from(["A", "B", "C", "D"]), min_size=1),
    st.sets(st.sampled_from(["r1", "r2", "r3"]), min_size=1),
)


@given(_onts, _onts, _onts)
def test_merge_commutative_and_associative_on_type_sets(x, y, z):
    ab = merge_ontologies([x, y])
    ba = merge_ontologies([y, x])
    assert ab.entity_types == ba.entity_types
    assert ab.relation_types == ba.relation_types
    left = merge_ontologies([merge_ontologies([x, y]), z])
    right = merge_ontologies([x, merge_ontologies([y, z])])
    assert left.entity_types == right.entity_types
    assert left.relation_types == right.relation_types


def test_default_template_and_instruction():
    ontology = _ont("location", {"A"}, {"r"})
    template = default_template(ontology)
    assert template.template_id == "location"
    assert template.ontology_name == "location"
    assert template.instruction_text == DEFAULT_INSTRUCTION
    assert "relation(subject, object)" in DEFAULT_INSTRUCTION


def test_ontology_to_json_is_sorted():
    payload = json.loads(ontology_to_json(_ont("x", {"B", "A"}, {"r2", "r1"})))
    assert payload["entity_types"] == ["A", "B"]
    assert payload["relation_types"] == ["r1", "r2"]


def test_ontologies_by_name_rejects_clashes():
    with pytest.raises(DuplicateName):
        ontologies_by_name([_ont("x", {"A"}, {"r"}), _ont("x", {"B"}, {"q"})])
