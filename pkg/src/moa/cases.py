"""Patient cohort model: case records, ingestion, and clinical encodings.

A cohort is a line-delimited JSON file with one record per patient. All
clinical fields are optional; what matters downstream is that the encoders
here are deterministic and never peek outside the training fold when they
build vocabularies.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from moa.embeddings import Embedding
from moa.errors import CohortParseError, CohortValidationError

logger = logging.getLogger(__name__)

LABEL_WILDTYPE = "wildtype"
LABEL_MUTANT = "mutant"
LABELS = (LABEL_WILDTYPE, LABEL_MUTANT)
# Integer encoding used by the classifier: 0 = wildtype, 1 = mutant.
LABEL_TO_INDEX = {LABEL_WILDTYPE: 0, LABEL_MUTANT: 1}

ONCOGENICITY_VALUES = ("oncogenic", "likely-oncogenic", "unknown")

# Genes retained when building molecular summaries.
DEFAULT_GENE_FILTER = frozenset({"TP53", "CIC"})

# Clinical text is rendered as "Label: value." sentences in this fixed order;
# absent fields are omitted entirely (no placeholders).
CLINICAL_TEXT_FIELDS = (
    ("Age", "age_years"),
    ("Sex", "sex"),
    ("Tumor class", "tumor_class"),
    ("Histologic morphology", "histologic_morphology"),
    ("Treatment type", "treatment_type"),
    ("Therapeutic procedure", "therapeutic_procedure"),
)
CLINICAL_TEXT_TEMPLATE = "{label}: {value}."

# One-hot age handling: fixed decade bins [0-9] ... [80-89], [90+].
AGE_BIN_COUNT = 10

# Categorical variables one-hot encoded with a training-fold vocabulary.
ONE_HOT_CATEGORICAL_FIELDS = (
    "sex",
    "tumor_class",
    "histologic_morphology",
    "treatment_type",
    "therapeutic_procedure",
)

CASE_FIELD_NAMES = (
    "patient_id",
    "age_years",
    "sex",
    "tumor_class",
    "histologic_morphology",
    "treatment_type",
    "therapeutic_procedure",
    "molecular_summary",
    "slide_feature_path",
    "idh1_label",
)


@dataclass
class GeneAnnotation:
    """A curated annotation for one gene alteration."""

    gene_symbol: str
    alteration: str
    oncogenicity: str
    source: str = ""

    def __post_init__(self):
        if not self.gene_symbol:
            raise CohortValidationError("gene_symbol must be non-empty")
        if self.oncogenicity not in ONCOGENICITY_VALUES:
            raise CohortValidationError(
                f"oncogenicity {self.oncogenicity!r} not in {ONCOGENICITY_VALUES}"
            )


@dataclass
class PatientCase:
    """Structured facts about one patient."""

    patient_id: str
    age_years: int | None = None
    sex: str | None = None
    tumor_class: str | None = None
    histologic_morphology: str | None = None
    treatment_type: str | None = None
    therapeutic_procedure: str | None = None
    molecular_summary: list[GeneAnnotation] | None = None
    slide_feature_path: str | None = None
    idh1_label: str | None = None

    def __post_init__(self):
        if not self.patient_id:
            raise CohortValidationError("patient_id must be non-empty")
        if self.age_years is not None and (
            not isinstance(self.age_years, int) or self.age_years < 0
        ):
            raise CohortValidationError(
                f"{self.patient_id}: age_years must be a non-negative integer"
            )
        if self.idh1_label is not None and self.idh1_label not in LABELS:
            raise CohortValidationError(
                f"{self.patient_id}: idh1_label {self.idh1_label!r} not in {LABELS}"
            )

    @property
    def has_clinical_fields(self) -> bool:
        """True when any demographic/diagnostic/treatment field is present."""
        return any(getattr(self, attr) is not None for _, attr in CLINICAL_TEXT_FIELDS)

    @property
    def evaluation_eligible(self) -> bool:
        return self.idh1_label is not None


@dataclass
class CohortManifest:
    """A validated list of cases plus per-label counts."""

    cases: list[PatientCase]
    class_counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        recomputed = self.recompute_counts()
        if not self.class_counts:
            self.class_counts = recomputed
        elif self.class_counts != recomputed:
            raise CohortValidationError(
                f"class_counts {self.class_counts} do not match cases {recomputed}"
            )

    def recompute_counts(self) -> dict[str, int]:
        counts = {label: 0 for label in LABELS}
        for case in self.cases:
            if case.idh1_label is not None:
                counts[case.idh1_label] += 1
        return counts

    @property
    def ids(self) -> set[str]:
        return {case.patient_id for case in self.cases}

    def eligible_cases(self) -> list[PatientCase]:
        """Cases usable for training/evaluation (label present)."""
        return [case for case in self.cases if case.evaluation_eligible]

    def case_by_id(self, patient_id: str) -> PatientCase:
        for case in self.cases:
            if case.patient_id == patient_id:
                return case
        raise KeyError(patient_id)


def _parse_annotation(raw, record_index: int) -> GeneAnnotation:
    if not isinstance(raw, dict):
        raise CohortParseError(f"record {record_index}: molecular_summary entries must be objects")
    allowed = {"gene_symbol", "alteration", "oncogenicity", "source"}
    unknown = set(raw) - allowed
    if unknown:
        raise CohortParseError(
            f"record {record_index}: unknown annotation keys {sorted(unknown)}"
        )
    try:
        return GeneAnnotation(
            gene_symbol=raw.get("gene_symbol", ""),
            alteration=raw.get("alteration", ""),
            oncogenicity=raw.get("oncogenicity", "unknown"),
            source=raw.get("source", ""),
        )
    except CohortValidationError as exc:
        raise CohortParseError(f"record {record_index}: {exc}") from exc


def _parse_case(raw: dict, record_index: int) -> PatientCase:
    unknown = set(raw) - set(CASE_FIELD_NAMES)
    if unknown:
        raise CohortParseError(f"record {record_index}: unknown keys {sorted(unknown)}")
    annotations = None
    if raw.get("molecular_summary") is not None:
        if not isinstance(raw["molecular_summary"], list):
            raise CohortParseError(f"record {record_index}: molecular_summary must be a list")
        annotations = [_parse_annotation(a, record_index) for a in raw["molecular_summary"]]
    try:
        return PatientCase(
            patient_id=raw.get("patient_id", ""),
            age_years=raw.get("age_years"),
            sex=raw.get("sex"),
            tumor_class=raw.get("tumor_class"),
            histologic_morphology=raw.get("histologic_morphology"),
            treatment_type=raw.get("treatment_type"),
            therapeutic_procedure=raw.get("therapeutic_procedure"),
            molecular_summary=annotations,
            slide_feature_path=raw.get("slide_feature_path"),
            idh1_label=raw.get("idh1_label"),
        )
    except CohortValidationError as exc:
        raise CohortParseError(f"record {record_index}: {exc}") from exc


def load_cohort(path, strict: bool = False) -> CohortManifest:
    """Load and validate a line-delimited patient-case file.

    Relative slide_feature_path values are resolved against the cases
    file's own directory, so a cohort can travel with its feature files.
    Cases missing idh1_label are retained but flagged evaluation-ineligible
    (rejected outright under strict=True, as are cases with no clinical
    fields at all).
    """
    path = Path(path)
    if not path.exists():
        raise CohortParseError(f"cases file not found: {path}")
    cases: list[PatientCase] = []
    with path.open("r", encoding="utf-8") as fh:
        for record_index, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CohortParseError(f"record {record_index}: invalid JSON ({exc})") from exc
            if not isinstance(raw, dict):
                raise CohortParseError(f"record {record_index}: expected an object")
            case = _parse_case(raw, record_index)
            if case.slide_feature_path is not None and not Path(case.slide_feature_path).is_absolute():
                case.slide_feature_path = str(path.parent / case.slide_feature_path)
            cases.append(case)

    seen: set[str] = set()
    duplicates: set[str] = set()
    for case in cases:
        if case.patient_id in seen:
            duplicates.add(case.patient_id)
        seen.add(case.patient_id)
    if duplicates:
        raise CohortValidationError(f"duplicate patient ids: {sorted(duplicates)}")

    if not cases:
        logger.warning("cohort file %s contains no cases", path)

    unlabeled = [c.patient_id for c in cases if not c.evaluation_eligible]
    if unlabeled:
        logger.warning(
            "%d case(s) lack idh1_label and are evaluation-ineligible", len(unlabeled)
        )
    fieldless = [c.patient_id for c in cases if not c.has_clinical_fields]
    if fieldless:
        logger.warning("%d case(s) carry no clinical fields", len(fieldless))
    if strict and (unlabeled or fieldless):
        problems = sorted(set(unlabeled) | set(fieldless))
        raise CohortValidationError(f"strict mode: incomplete cases {problems}")

    return CohortManifest(cases=cases)


def build_clinical_text(case: PatientCase) -> str:
    """Serialize present clinical fields as fixed-order "Label: value." sentences.

    Molecular summaries are deliberately excluded: the clinical-text and
    one-hot baselines never see them.
    """
    sentences = []
    for label, attr in CLINICAL_TEXT_FIELDS:
        value = getattr(case, attr)
        if value is not None:
            sentences.append(CLINICAL_TEXT_TEMPLATE.format(label=label, value=value))
    if not sentences:
        logger.warning("case %s has no clinical fields; clinical text is empty", case.patient_id)
        return ""
    return " ".join(sentences)


def build_molecular_summary(
    case: PatientCase, allowed_genes: frozenset[str] = DEFAULT_GENE_FILTER
) -> str | None:
    """One sentence per retained annotation, or None when nothing survives.

    Annotations survive when the gene is in allowed_genes and the
    oncogenicity classification is not "unknown".
    """
    if not allowed_genes:
        raise ValueError("allowed_genes must be non-empty")
    if not case.molecular_summary:
        return None
    sentences = [
        f"{a.gene_symbol} {a.alteration}: {a.oncogenicity}."
        for a in case.molecular_summary
        if a.gene_symbol in allowed_genes and a.oncogenicity != "unknown"
    ]
    if not sentences:
        return None
    return " ".join(sentences)


def _age_bin(age: int) -> int:
    return min(age // 10, AGE_BIN_COUNT - 1)


def one_hot_encode_cohort(
    manifest: CohortManifest, training_ids: set[str]
) -> dict[str, Embedding]:
    """One-hot encode every case using vocabularies from training cases only.

    Each variable contributes a block: fixed decade bins for age, a
    training-derived sorted vocabulary for the categorical fields. Missing
    values and categories unseen in training yield all-zero blocks, so the
    output dimension is identical for every patient.
    """
    if not training_ids:
        raise CohortValidationError("one-hot encoding requires a non-empty training set")
    unknown = set(training_ids) - manifest.ids
    if unknown:
        raise CohortValidationError(f"training ids not in cohort: {sorted(unknown)}")

    training_cases = [c for c in manifest.cases if c.patient_id in training_ids]
    vocabularies: dict[str, list[str]] = {}
    for attr in ONE_HOT_CATEGORICAL_FIELDS:
        values = {getattr(c, attr) for c in training_cases if getattr(c, attr) is not None}
        vocabularies[attr] = sorted(values)

    encoded: dict[str, Embedding] = {}
    for case in manifest.cases:
        blocks = [np.zeros(AGE_BIN_COUNT)]
        if case.age_years is not None:
            blocks[0][_age_bin(case.age_years)] = 1.0
        for attr in ONE_HOT_CATEGORICAL_FIELDS:
            vocab = vocabularies[attr]
            block = np.zeros(len(vocab))
            value = getattr(case, attr)
            if value is not None and value in vocab:
                block[vocab.index(value)] = 1.0
            blocks.append(block)
        encoded[case.patient_id] = Embedding(
            id=case.patient_id, vector=np.concatenate(blocks), modality="one_hot"
        )
    return encoded
