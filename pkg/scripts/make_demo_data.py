#!/usr/bin/env python3
"""Regenerate the synthetic demo fixture set under fixtures/demo/.

The cohort is built from two latent factors per patient, u and v, with the
label decided by their sum. Structured clinical fields (and therefore the
report text) are noisy views of u only; the slide feature vector is a noisy
view of v only. Each modality alone is a partial predictor, and fusing them
recovers most of the signal — the property the evaluation is designed to
demonstrate. Tool fixtures are recorded by running the real agent loop once
with deterministic synthetic fetchers, so offline replays are byte-exact.

Usage: python3 scripts/make_demo_data.py [--root fixtures/demo]
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from moa.agent import AgentConfig
from moa.cases import load_cohort
from moa.knowledge_base import build_index_from_corpus
from moa.pipeline import generate_reports
from moa.text_embedder import EmbedderConfig
from moa.tools.base import FixtureStore, ToolRegistry
from moa.tools.oncokb import OncoKbTool
from moa.tools.pubmed import PubMedTool
from moa.tools.websearch import WebSearchTool

SEED = 20250823
N_ELIGIBLE = 150
N_WILDTYPE = 35
SLIDE_DIM = 768

FIELD_NOISE = 0.5       # sd of the noise on u behind each categorical field
AGE_NOISE = 5.0
SLIDE_SIGNAL = 4.0      # scale of the v-carrying direction in slide space
SLIDE_V_NOISE = 0.4     # sd of the noise on v before projection
SLIDE_DISTRACTORS = 2
SLIDE_ISO_NOISE = 0.05

EMBED_DIM = 256
TRAIN_EPOCHS = 100


def categorical(rng, ui, levels, bounds):
    x = ui + rng.normal(0.0, FIELD_NOISE)
    for bound, level in zip(bounds, levels):
        if x <= bound:
            return level
    return levels[-1]


def build_cohort(rng):
    """150 labeled cases driven by latents (u, v), plus 4 edge-case extras."""
    u = rng.normal(size=N_ELIGIBLE)
    v = rng.normal(size=N_ELIGIBLE)
    order = np.argsort(u + v)
    labels = ["mutant"] * N_ELIGIBLE
    for idx in order[:N_WILDTYPE]:
        labels[idx] = "wildtype"

    records = []
    for i in range(N_ELIGIBLE):
        ui = u[i]
        annotations = []
        if ui + rng.normal(0.0, FIELD_NOISE) > -0.3:
            annotations.append(
                {"gene_symbol": "TP53", "alteration": "R273H", "oncogenicity": "oncogenic"}
            )
        if ui + rng.normal(0.0, FIELD_NOISE) > 0.4:
            annotations.append(
                {"gene_symbol": "CIC", "alteration": "R215W", "oncogenicity": "likely-oncogenic"}
            )
        pid = f"TCGA-SYN-{i:04d}"
        records.append(
            {
                "patient_id": pid,
                "age_years": int(np.clip(round(50 - 8 * ui + rng.normal(0.0, AGE_NOISE)), 18, 89)),
                "sex": ["female", "male"][int(rng.integers(2))],
                "tumor_class": categorical(rng, ui, ["astrocytoma", "oligodendroglioma"], [0.0]),
                "histologic_morphology": categorical(
                    rng,
                    ui,
                    ["diffuse astrocytoma", "mixed glioma", "oligodendroglioma, NOS"],
                    [-0.5, 0.5],
                ),
                "treatment_type": categorical(rng, ui, ["chemotherapy", "radiation"], [0.0]),
                "therapeutic_procedure": categorical(
                    rng, ui, ["stereotactic biopsy", "tumor resection"], [0.0]
                ),
                "molecular_summary": annotations or None,
                "slide_feature_path": f"slides/{pid}.json",
                "idh1_label": labels[i],
            }
        )

    extras = [
        # Unlabeled but otherwise complete: generates a report, never evaluated.
        {
            "patient_id": "TCGA-SYN-0150",
            "age_years": 47,
            "sex": "female",
            "tumor_class": "oligodendroglioma",
            "histologic_morphology": "oligodendroglioma, NOS",
            "treatment_type": "radiation",
            "therapeutic_procedure": "tumor resection",
            "molecular_summary": [
                {"gene_symbol": "TP53", "alteration": "R273H", "oncogenicity": "oncogenic"}
            ],
            "slide_feature_path": "slides/TCGA-SYN-0150.json",
            "idh1_label": None,
        },
        # No slide available.
        {
            "patient_id": "TCGA-SYN-0151",
            "age_years": 58,
            "sex": "male",
            "tumor_class": "astrocytoma",
            "histologic_morphology": "diffuse astrocytoma",
            "treatment_type": "chemotherapy",
            "therapeutic_procedure": "stereotactic biopsy",
            "molecular_summary": None,
            "slide_feature_path": None,
            "idh1_label": None,
        },
        # Demographics only.
        {
            "patient_id": "TCGA-SYN-0152",
            "age_years": 36,
            "sex": "female",
            "tumor_class": None,
            "histologic_morphology": None,
            "treatment_type": None,
            "therapeutic_procedure": None,
            "molecular_summary": None,
            "slide_feature_path": None,
            "idh1_label": None,
        },
        # Molecular findings only, no clinical fields at all.
        {
            "patient_id": "TCGA-SYN-0153",
            "age_years": None,
            "sex": None,
            "tumor_class": None,
            "histologic_morphology": None,
            "treatment_type": None,
            "therapeutic_procedure": None,
            "molecular_summary": [
                {"gene_symbol": "CIC", "alteration": "R215W", "oncogenicity": "likely-oncogenic"}
            ],
            "slide_feature_path": None,
            "idh1_label": None,
        },
    ]
    return records, extras, u, v


def build_slides(rng, v):
    """Slide vectors: one dense v-carrying direction plus mild distraction."""
    rng_directions = np.random.default_rng(7)
    signal_dir = rng_directions.normal(size=SLIDE_DIM)
    signal_dir /= np.linalg.norm(signal_dir)
    distractors = rng_directions.normal(size=(SLIDE_DISTRACTORS, SLIDE_DIM))
    distractors /= np.linalg.norm(distractors, axis=1, keepdims=True)

    n = len(v)
    v_observed = v + rng.normal(0.0, SLIDE_V_NOISE, size=n)
    slides = np.outer(v_observed, signal_dir) * SLIDE_SIGNAL
    slides += rng.normal(size=(n, SLIDE_DISTRACTORS)) @ distractors
    slides += rng.normal(0.0, SLIDE_ISO_NOISE, size=(n, SLIDE_DIM))
    return slides


CORPUS = {
    "oligodendroglioma_overview": """Oligodendroglioma: clinical and molecular features

Oligodendroglioma is a diffusely infiltrating glioma defined at the molecular level by the combination of an IDH mutation and whole-arm codeletion of chromosomes 1p and 19q. Patients are typically adults in the fourth or fifth decade, and the tumor shows a predilection for the frontal lobes. Seizures are the most common presenting symptom, reflecting the cortical involvement of these lesions.

Histologically, classic oligodendroglioma is composed of rounded, monomorphic cells with perinuclear halos, a delicate branching capillary network, and frequent microcalcifications. Mitotic activity, microvascular proliferation, and necrosis distinguish the grade 3 (anaplastic) form from grade 2 disease.

The prognosis of oligodendroglioma is substantially better than that of other diffuse gliomas. Median survival beyond a decade is common in grade 2 disease, and the tumor is notable for its sensitivity to both radiotherapy and alkylating chemotherapy, particularly procarbazine, lomustine and vincristine regimens. Long-term follow-up of randomized trials has shown that the addition of chemotherapy to radiotherapy prolongs survival in codeleted tumors.

Because the defining molecular lesions are an IDH mutation plus 1p/19q codeletion, accurate molecular workup is essential: morphology alone misclassifies a meaningful fraction of cases. CIC mutations on the retained 19q allele are a characteristic secondary event in oligodendroglioma and are rare in astrocytic tumors, making them a useful discriminating marker when codeletion testing is equivocal.
""",
    "astrocytoma_idh1": """Diffuse astrocytoma and the IDH1 R132H mutation

Adult-type diffuse astrocytoma is an infiltrating glioma that, in its IDH-mutant form, follows a more indolent course than IDH-wildtype disease of comparable histologic grade. The canonical lesion is the IDH1 R132H point mutation, detectable by a mutation-specific antibody in the large majority of cases; rarer variants affect other residues of IDH1 or the homologous codon of IDH2.

Astrocytoma is distinguished from oligodendroglioma by the absence of 1p/19q codeletion and by frequent inactivating mutations of TP53 and ATRX. Loss of nuclear ATRX expression together with strong p53 immunopositivity supports the astrocytic lineage during diagnostic workup. Morphologically, the tumor shows fibrillary cells with hyperchromatic, irregular nuclei set in a loose microcystic matrix.

Grading of IDH-mutant astrocytoma spans grades 2 through 4. Mitotic activity defines grade 3, while necrosis, microvascular proliferation, or homozygous deletion of CDKN2A/B defines grade 4. The presence of an IDH mutation remains prognostically favorable at every grade, and IDH status is therefore the first branch point of modern classification.

Clinically, younger age at diagnosis, seizure presentation, and frontal or temporal location are typical for the IDH-mutant tumor. Gross total resection, when achievable, is associated with longer progression-free survival, and many grade 2 patients are managed with surgery followed by observation before radiotherapy and chemotherapy are introduced.
""",
    "idh_metabolism": """IDH mutations rewire tumor metabolism

Mutations of isocitrate dehydrogenase are among the earliest events in the genesis of low-grade glioma. The mutant enzyme acquires a neomorphic activity: instead of converting isocitrate to alpha-ketoglutarate, it reduces alpha-ketoglutarate to the oncometabolite D-2-hydroxyglutarate, which accumulates to millimolar concentrations in tumor tissue.

D-2-hydroxyglutarate competitively inhibits alpha-ketoglutarate-dependent dioxygenases, including the TET family of DNA demethylases and Jumonji-domain histone demethylases. The result is the glioma CpG island methylator phenotype, a genome-wide hypermethylation state that locks tumor cells in a poorly differentiated, self-renewing condition. This epigenetic reprogramming, rather than a classical proliferative drive, is thought to explain the slow natural history of IDH-mutant glioma.

The metabolite itself has diagnostic value: magnetic resonance spectroscopy can detect 2-hydroxyglutarate noninvasively, and elevated peaks correlate with mutant IDH1 in resected tissue. Therapeutically, small-molecule inhibitors of the mutant enzyme lower 2-hydroxyglutarate levels and have shown activity in slowing the growth of residual disease, an approach now supported by randomized evidence in grade 2 tumors.

For classification, IDH status divides adult diffuse glioma into families with distinct natural histories, and essentially all oligodendroglioma and the majority of grade 2 and 3 astrocytoma carry the mutation.
""",
    "tp53_cic_genomics": """TP53 and CIC alterations in diffuse glioma

Beyond the defining IDH mutation, the genomic landscape of adult low-grade glioma is dominated by a small set of recurrent alterations whose pattern tracks lineage. TP53 mutation is the hallmark of the astrocytic branch: missense substitutions in the DNA-binding domain, including the R273 hotspot, abolish sequence-specific transactivation and frequently produce strong nuclear accumulation of the inactive protein. TP53 mutation co-occurs with ATRX inactivation and is nearly mutually exclusive with 1p/19q codeletion.

CIC, encoding the capicua transcriptional repressor on 19q13, is the signature second hit of the oligodendroglial branch. Truncating and missense CIC mutations, such as substitutions in the HMG box around residue R215, arise on the retained allele after codeletion removes the other copy. Loss of capicua derepresses ETV/PEA3 transcription factors downstream of receptor tyrosine kinase signaling and accelerates progression of codeleted tumors.

In curated knowledge bases, hotspot TP53 substitutions are classified as oncogenic with loss-of-function effect, while recurrent CIC truncations are annotated as likely oncogenic. Clinically, neither lesion is directly druggable today; their value lies in classification and prognosis. The co-occurrence pattern — TP53 with astrocytoma, CIC with oligodendroglioma — is strong enough that a molecular report listing these genes materially constrains the diagnosis even before codeletion results return.
""",
    "radiotherapy_lgg": """Radiotherapy in low-grade glioma management

Radiotherapy remains a central component of treatment for diffuse low-grade glioma, although its timing is individualized. Early radiotherapy after surgery lengthens progression-free survival but not overall survival when compared with deferral to progression, so observation is reasonable in younger patients after extensive resection of an IDH-mutant tumor.

Standard management for high-risk grade 2 disease — age over 40, subtotal resection, or astrocytoma histology — pairs radiotherapy of roughly 50 Gy in daily fractions with adjuvant chemotherapy. The landmark randomized evidence showed that adding procarbazine, lomustine and vincristine to radiotherapy nearly doubled median survival in codeleted oligodendroglioma, and temozolomide is widely used where that regimen is poorly tolerated.

Modern planning techniques matter in a population whose survival is measured in decades. Intensity-modulated delivery and proton therapy reduce dose to hippocampus and normal cortex, limiting the delayed neurocognitive effects that historically accompanied whole-brain techniques. Pseudoprogression within the radiation field must be distinguished from true progression on follow-up imaging of any irradiated glioma, typically by perfusion imaging or interval reassessment.

Response to irradiation differs by molecular class: IDH-mutant, codeleted tumors are the most radiosensitive, while IDH-wildtype tumors progress earliest despite identical schedules, a divergence that argues for molecular stratification in every radiotherapy trial.
""",
    "resection_outcomes": """Extent of resection and outcomes in low-grade glioma

Across retrospective series and modern registry analyses, the extent of surgical resection is among the strongest modifiable prognostic factors in diffuse low-grade glioma. Gross total resection of the T2/FLAIR abnormality is associated with longer overall survival, delayed malignant transformation, and better seizure control than biopsy or subtotal debulking, and supramaximal resection extends the benefit further in selected astrocytoma cohorts.

The infiltrative nature of glioma makes the margin a biological fiction: tumor cells extend beyond any imaging boundary. Surgical strategy therefore balances cytoreduction against function. Awake craniotomy with intraoperative cortical and subcortical mapping permits resection within language and motor territories, while intraoperative MRI and fluorescence guidance increase the completeness of resection.

When the lesion is deep-seated, crosses the midline, or involves eloquent cortex diffusely, a stereotactic biopsy establishes the diagnosis at minimal morbidity, and the molecular profile obtained from even small samples — IDH status, codeletion, TP53 — now carries much of the prognostic weight formerly assigned to histologic grade alone.

Timing interacts with biology. In IDH-mutant oligodendroglioma, slow growth can justify staged or repeat resection over many years, whereas early maximal surgery is favored in astrocytoma because residual volume predicts earlier transformation. Postoperative seizure freedom, achieved in the majority after complete resection, is itself a meaningful quality-of-life outcome.
""",
    "histopathology_grading": """Histopathological assessment of diffuse gliomas

Microscopic evaluation remains the anchor of glioma diagnosis even in the molecular era. The pathologist assesses cellularity, nuclear atypia, mitotic figures, microvascular proliferation and necrosis on hematoxylin and eosin sections, then integrates those observations with immunohistochemistry and molecular findings into a layered diagnosis.

The morphological vocabulary is lineage-specific. Astrocytic tumors show elongated, irregular hyperchromatic nuclei in a fibrillary background; oligodendroglial tumors show uniform round nuclei with perinuclear clearing, branching capillaries and calcospherites; and tumors with ambiguous or mixed morphology — historically labeled mixed glioma or oligoastrocytoma — are now resolved almost entirely by molecular testing rather than morphology.

Grading criteria are applied within each lineage. A single convincing focus of necrosis or microvascular proliferation elevates an astrocytoma to grade 4; brisk mitotic activity alone defines grade 3 in both lineages. Sampling matters: small biopsies underestimate grade in a quarter of cases, which is one reason integrated molecular markers have displaced pure histologic grading for treatment decisions.

Frozen-section interpretation at the time of surgery guides the surgeon on diagnostic adequacy but is deliberately conservative. Permanent sections, supplemented by IDH1 R132H immunostaining, ATRX and p53 stains, and chromosomal testing, deliver the final classification on which adjuvant therapy is planned.
""",
    "wsi_foundation_models": """Slide-level representation learning for computational pathology

Whole-slide images are gigapixel records of tissue morphology, and converting them into fixed-length vectors suitable for downstream prediction is the central engineering problem of computational pathology. The dominant recipe tiles the slide into patches, encodes each patch with a vision encoder pretrained on histology, and aggregates patch embeddings into a single slide-level representation with an attention-based or transformer aggregator.

Recent foundation models trained on tens of thousands of slides produce general-purpose slide embeddings that transfer across organs and tasks. In glioma specifically, slide-level embeddings have proven strongly predictive of molecular class: IDH mutation status and 1p/19q codeletion can be recovered from morphology alone with performance approaching molecular assays, confirming long-standing observations that genotype leaves a visible signature in tissue architecture.

A practical virtue of the slide-embedding paradigm is separation of concerns. The expensive encoding step runs once per slide; downstream tasks — subtype classification, mutation prediction, survival modeling — train lightweight heads such as small multilayer perceptrons on the frozen vectors. This makes rigorous cross-validation cheap and keeps the morphological representation fixed while hypotheses change.

Care is still required at evaluation time. Stain variation, scanner differences and site-specific artifacts can leak into embeddings, so multi-site validation and careful normalization remain essential before clinical claims are made for any slide-level predictor in glioma or elsewhere.
""",
    "cardiology_referrals": """Community hospital cardiology referral pathways

Effective referral pathways between community hospitals and tertiary cardiac centers shorten the time from first presentation to definitive care. Chest-pain units triage suspected acute coronary syndromes using high-sensitivity troponin protocols, and direct transfer agreements route ST-elevation infarctions to catheterization laboratories within guideline windows.

For stable disease, structured referral criteria — refractory angina despite two antianginal agents, declining ejection fraction, or valve disease crossing severity thresholds — reduce unnecessary tertiary visits while catching progression early. Shared echocardiography standards and a common imaging archive prevent duplicate studies at the receiving center.

Heart-failure pathways benefit most from nurse-led titration clinics embedded in the community: patients uptitrate to target doses of disease-modifying therapy locally, with tertiary review reserved for device evaluation or advanced-therapy assessment. Audit of referral completeness, time-to-appointment and outcome feedback to referrers closes the loop and keeps pathway performance visible to both institutions.
""",
}


class RecordingPubMed(PubMedTool):
    """Record-mode stand-in: deterministic article sets derived from the term."""

    def _fetch_live(self, params):
        term = params["term"]
        digest = int.from_bytes(term.encode("utf-8")[:6].ljust(6, b"x"), "big")
        pmids = [str(30000000 + (digest + 7919 * i) % 9999991) for i in range(3)]
        articles = []
        for rank, pmid in enumerate(pmids, start=1):
            articles.append(
                f"<PubmedArticle><MedlineCitation><PMID>{pmid}</PMID><Article>"
                f"<ArticleTitle>Study {rank} of {term}: cohort findings</ArticleTitle>"
                f"<Abstract><AbstractText>Retrospective analysis of {term} reporting "
                f"molecular correlates and survival.</AbstractText></Abstract>"
                f"</Article></MedlineCitation></PubmedArticle>"
            )
        xml = "<PubmedArticleSet>" + "".join(articles) + "</PubmedArticleSet>"
        return {
            "esearch": {"esearchresult": {"idlist": pmids, "retmax": str(len(pmids))}},
            "efetch_xml": xml,
        }


ONCOKB_TABLE = {
    ("TP53", "R273H"): (
        "Oncogenic",
        "TP53 R273H is a hotspot missense mutation in the DNA-binding domain with "
        "loss-of-function effect.",
    ),
    ("CIC", "R215W"): (
        "Likely Oncogenic",
        "CIC R215W alters the HMG box of the capicua repressor and is recurrent in "
        "1p/19q-codeleted glioma.",
    ),
}


class RecordingOncoKb(OncoKbTool):
    """Record-mode stand-in: curated responses for the genes the cohort uses."""

    def _fetch_live(self, params):
        oncogenic, summary = ONCOKB_TABLE.get(
            (params["gene"], params["alteration"]),
            ("Unknown", "No curated evidence for this alteration."),
        )
        return {"oncogenic": oncogenic, "variantSummary": summary}


def write_cases(root: Path, records, extras):
    with (root / "cases.jsonl").open("w", encoding="utf-8") as fh:
        for record in records + extras:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_slides(root: Path, records, extras, slides):
    slide_dir = root / "slides"
    slide_dir.mkdir()
    for i, record in enumerate(records):
        vector = [round(float(x), 5) for x in slides[i]]
        with (slide_dir / f"{record['patient_id']}.json").open("w") as fh:
            json.dump(vector, fh)
    # The unlabeled-but-complete extra reuses the last row's latent recipe.
    rng = np.random.default_rng(SEED + 1)
    extra_vec = build_slides(rng, np.array([0.8]))[0]
    with (slide_dir / "TCGA-SYN-0150.json").open("w") as fh:
        json.dump([round(float(x), 5) for x in extra_vec], fh)


def write_corpus(root: Path):
    corpus_dir = root / "corpus"
    corpus_dir.mkdir()
    for name, text in CORPUS.items():
        (corpus_dir / f"{name}.txt").write_text(text, encoding="utf-8")


def write_config(root: Path):
    config = {
        "cases_path": "cases.jsonl",
        "corpus_dir": "corpus",
        "fixtures_dir": "http",
        "output_dir": "out",
        "seed": 0,
        "offline": True,
        "n_folds": 5,
        "embedder": {"kind": "hashed", "dimension": EMBED_DIM},
        "train": {"epochs": TRAIN_EPOCHS},
        "agent": {"histology_enabled": False},
    }
    with (root / "demo.cfg").open("w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def record_fixtures(root: Path):
    """Run the real agent loop once, recording every tool exchange."""
    fixtures = FixtureStore(root / "http")
    registry = ToolRegistry()
    registry.register(RecordingPubMed(mode="record", fixtures=fixtures))
    registry.register(RecordingOncoKb(mode="record", fixtures=fixtures, token="n/a"))
    registry.register(WebSearchTool(mode="record", fixtures=fixtures))

    manifest = load_cohort(root / "cases.jsonl")
    embedder = EmbedderConfig(kind="hashed", dimension=EMBED_DIM)
    kb_index = build_index_from_corpus(root / "corpus", embedder)
    agent_config = AgentConfig(histology_enabled=False)
    with tempfile.TemporaryDirectory() as scratch:
        # Single worker: concurrent recording could race on shared fixture keys.
        generate_reports(
            manifest, agent_config, registry, kb_index, scratch, max_workers=1
        )
    return len(list((root / "http").glob("*.json")))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--root",
        default=str(Path(__file__).resolve().parent.parent / "fixtures" / "demo"),
    )
    args = parser.parse_args()
    root = Path(args.root)
    if root.exists():
        shutil.rmtree(root)
    root.mkdir(parents=True)

    rng = np.random.default_rng(SEED)
    records, extras, u, v = build_cohort(rng)
    slides = build_slides(rng, v)

    write_cases(root, records, extras)
    write_slides(root, records, extras, slides)
    write_corpus(root)
    write_config(root)
    n_fixtures = record_fixtures(root)

    n_mutant = sum(1 for r in records if r["idh1_label"] == "mutant")
    print(
        f"wrote {len(records)} labeled + {len(extras)} extra cases, "
        f"{n_mutant} mutant / {len(records) - n_mutant} wildtype, "
        f"{len(CORPUS)} corpus docs, {n_fixtures} tool fixtures -> {root}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
