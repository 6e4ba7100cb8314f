#!/usr/bin/env python3
"""Rebuild the bundled test fixtures under tests/fixtures/.

Writes the fixture corpus, ontologies, demonstration pool, and run
config, then records the completion cassette by running the scripted
extraction and judge stages into a scratch directory.  The reference
triples are the strong extractor's zero-shot output, which is grounded
and conformant by construction.

Every recorded response is a pure function of the fixture bytes, so
rebuilding changes nothing but the cassette timestamps.  Requires the
package to be installed (pip install -e . --no-build-isolation).
"""

from __future__ import annotations

import shutil
import tempfile
from pathlib import Path

from triplekit.corpus import chunk_document, load_corpus
from triplekit.pipeline import RunConfig, run_extraction, run_judge_eval
from triplekit.prompts import derive_demonstrations, write_demonstrations
from triplekit.triples import Triple

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

DOC_CLEARANCE = """\
The Kembal Province clearance programme released 2,500,011 square meters of \
contaminated land during the 2020 operational season. Clearance teams from the \
National Demining Organisation destroyed 1,482 anti-personnel landmines and 356 \
items of unexploded ordnance across eleven task areas. The programme operated \
under the National Mine Action Authority, and all cleared land was formally \
handed over to district councils in December. Technical survey preceded full \
clearance in every task area, e.g. task NK-07, where evidence points reduced \
the suspected hazardous area by almost half. Quality management teams sampled \
4,120 sq. m. of cleared ground and found no missed items.

Battle area clearance in the eastern sector recovered 92 items of abandoned \
ordnance. The sector borders the Salva river, and two bridges remain closed \
pending verification. Infrastructure damage in the sector was caused by old \
wartime munitions.

Mr. T. Boran, director of the provincial office, reported that operations \
employed 214 staff, including 38 women. Three mechanical assets supported the \
teams: two tillers and one front loader. The provincial office coordinates \
with the U.N. development programme on land release priorities.

Funding for the 2020 season totalled 1.8 million dollars, provided by the \
Harmon Trust and two bilateral donors. The budget covered survey, clearance, \
and explosive ordnance risk education. Community liaison officers delivered \
risk education sessions in forty villages, reaching 12,640 residents. Priority \
for the 2021 season shifts to the Tervan corridor, where the remaining \
contamination blocks an irrigation scheme serving six communes. The corridor \
survey begins in March, subject to seasonal access constraints, and the \
authority expects to deploy four manual clearance teams alongside one \
mechanical ground preparation unit for the full dry season.

The programme reported zero demining accidents during the season. One civilian \
accident occurred outside a marked hazardous area in October, injuring two \
residents who were collecting firewood near an old defensive position.
"""

DOC_VICTIM = """\
The Quality of Life Survey (QLS) was conducted by the Department of Victim \
Assistance of the national authority between April and September 2021. Survey \
teams interviewed 1,240 households across Tervan Province, covering every \
commune with recorded mine accidents since 2005. The survey registered 96 \
direct survivors and 312 indirect beneficiaries, and referred 41 survivors to \
the Tervan Provincial Hospital for specialist care. Field teams logged each \
interview against the national casualty database, correcting 58 duplicate \
records and adding 17 previously unregistered accidents from remote villages \
reached during the wet season by boat.

Peer support groups now operate in nine communes. The groups are organised by \
the Tervan Survivors Association, which also manages a revolving livestock \
fund. Twelve members completed vocational training in small engine repair \
during the reporting period.

Physical rehabilitation services remain concentrated at the provincial \
capital. The orthopaedic workshop produced 214 prosthetic devices in 2021, \
and mobile outreach visits served patients in four remote districts. \
Transport costs remain the main barrier to access, cited by 61 percent of \
surveyed households.
"""

LOCATION_ONT = """\
# Geography and institutions referenced in clearance reporting.
name: location
entities: AdministrativeArea, Association, Location, Organisation, MedicalFacility
relations: hasAdministrativeArea, hasAssociation, hasLocation, hasOrganisation, locatedNear
"""

EVENTS_ONT = """\
# Operational events: accidents, casualties, activities, equipment.
name: events
entities: Accident, Casualty, Activity, Equipment, Date
relations: hasAccidentInfo, hasCasualtyInfo, hasActivityDate, usesEquipment, causedBy
"""

RUN_CFG = """\
# Offline fixture run: replays the recorded cassette.
corpus = corpus/manifest.json
ontology_dir = ont
extractors = extractor-strong, extractor-medium, extractor-weak
strategies = zero_shot, ontology_paragraph
demonstrations = pool.jsonl
reference = reference.jsonl
mode = replay
cassette = cassettes/records.jsonl
provider = scripted
judge_model = judge-v1
judge_method = randomized_fair
judge_strategy = zero_shot
seed = 13
"""

# Demonstration sources: held-out annotated paragraphs, one per
# ontology, that share no contiguous span with the corpus chunks.
LOCATION_DEMO_CONTEXT = (
    "The Kembal Demining Association operates a regional office in Vastren "
    "District. The office is located near the Doru river crossing, and "
    "casualty referrals go to the Vastren District Hospital."
)
LOCATION_DEMO_ANSWER = (
    Triple("hasAssociation", "Vastren District", "Kembal Demining Association"),
    Triple("locatedNear", "regional office", "Doru river crossing"),
    Triple("hasOrganisation", "casualty referrals", "Vastren District Hospital"),
)

EVENTS_DEMO_CONTEXT = (
    "A field accident on 14 March 2018 injured two deminers during a "
    "vegetation cutting activity. The team used a front loader fitted with a "
    "tiller, and the accident was caused by a buried fragmentation mine."
)
EVENTS_DEMO_ANSWER = (
    Triple("hasAccidentInfo", "field accident", "injured two deminers"),
    Triple("hasActivityDate", "vegetation cutting activity", "14 March 2018"),
    Triple("usesEquipment", "team", "front loader"),
    Triple("causedBy", "accident", "buried fragmentation mine"),
)


def write_static_fixtures() -> None:
    (FIXTURES / "corpus").mkdir(parents=True, exist_ok=True)
    (FIXTURES / "ont").mkdir(parents=True, exist_ok=True)
    (FIXTURES / "corpus" / "kembal-clearance-2020.txt").write_text(
        DOC_CLEARANCE, encoding="utf-8"
    )
    (FIXTURES / "corpus" / "tervan-victim-assistance-2021.txt").write_text(
        DOC_VICTIM, encoding="utf-8"
    )
    (FIXTURES / "corpus" / "manifest.json").write_text(
        """\
[
  {
    "doc_id": "kembal-clearance-2020",
    "title": "Kembal Province Clearance Operations 2020",
    "file": "kembal-clearance-2020.txt",
    "page_count": 6
  },
  {
    "doc_id": "tervan-victim-assistance-2021",
    "title": "Tervan Victim Assistance Survey 2021",
    "file": "tervan-victim-assistance-2021.txt",
    "page_count": 4
  }
]
""",
        encoding="utf-8",
    )
    (FIXTURES / "ont" / "location.ont").write_text(LOCATION_ONT, encoding="utf-8")
    (FIXTURES / "ont" / "events.ont").write_text(EVENTS_ONT, encoding="utf-8")
    (FIXTURES / "run.cfg").write_text(RUN_CFG, encoding="utf-8")

    pool = derive_demonstrations(LOCATION_DEMO_CONTEXT, LOCATION_DEMO_ANSWER, "location")
    pool += derive_demonstrations(EVENTS_DEMO_CONTEXT, EVENTS_DEMO_ANSWER, "events")
    write_demonstrations(pool, FIXTURES / "pool.jsonl")
    print(f"pool: {len(pool)} demonstrations")


def record_cassette() -> None:
    cassette = FIXTURES / "cassettes" / "records.jsonl"
    if cassette.exists():
        cassette.unlink()  # record mode appends; start clean
    config = RunConfig.from_file(FIXTURES / "run.cfg", overrides={"mode": "record"})
    for doc in load_corpus(config.corpus):
        chunks = chunk_document(doc, config.max_words, config.min_words)
        sizes = ", ".join(str(c.word_count) for c in chunks)
        print(f"{doc.doc_id}: {len(chunks)} chunks ({sizes} words)")
    with tempfile.TemporaryDirectory() as scratch:
        manifest = run_extraction(config, scratch)
        print(f"prompts per strategy: {manifest['prompt_counts']}")
        shutil.copyfile(
            Path(scratch) / "triples" / "extractor-strong__zero_shot.jsonl",
            FIXTURES / "reference.jsonl",
        )
        run_judge_eval(config, scratch)
    records = sum(1 for line in cassette.read_text(encoding="utf-8").splitlines() if line)
    print(f"cassette: {records} records at {cassette}")


def main() -> None:
    write_static_fixtures()
    record_cassette()


if __name__ == "__main__":
    main()
