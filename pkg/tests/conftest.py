import pytest

from pathlib import Path

from triplekit.ontology import Ontology

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture()
def location_ontology() -> Ontology:
    return Ontology(
        name="location",
        entity_types=frozenset(
            {"AdministrativeArea", "Association", "Location", "Organisation", "MedicalFacility"}
        ),
        relation_types=frozenset(
            {"hasAdministrativeArea", "hasAssociation", "hasLocation", "hasOrganisation", "locatedNear"}
        ),
    )
