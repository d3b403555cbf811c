"""Cohort schemas, CSV ingestion, imputation, splits, and the synthetic
multimodal generator.

A cohort directory holds one CSV per modality (header
``patient_id,f0,...,f{D-1}``, empty cell = missing) plus ``labels.csv``
(``patient_id,label``). The synthetic generator plants a latent factor
vector per patient, exposes different factors through different
modalities, and derives the label from a factor combination that is only
observable across modalities.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

NUM_CLASSES = 5

MODALITY_NAMES = ("CT", "Genomic", "Demographic", "Clinical", "Regimen", "Continuous")


@dataclass(frozen=True)
class ModalitySchema:
    name: str
    native_dim: int
    reduced_dim: int
    value_kind: str  # "continuous" or "categorical"


# full clinical-scale layout: native and reduced widths per source modality
FULL_SCALE_SCHEMAS = (
    ModalitySchema("CT", 2048, 128, "continuous"),
    ModalitySchema("Genomic", 4081, 64, "categorical"),
    ModalitySchema("Demographic", 29, 8, "categorical"),
    ModalitySchema("Clinical", 1726, 128, "categorical"),
    ModalitySchema("Regimen", 233, 64, "categorical"),
    ModalitySchema("Continuous", 8, 4, "continuous"),
)


class CohortFormatError(ValueError):
    pass


@dataclass
class PatientRecord:
    patient_id: str
    features: dict  # modality name -> float array (NaN where missing)
    missing: dict  # modality name -> boolean array (original missingness)
    label: int


@dataclass
class SplitSpec:
    train_fraction: float = 0.70
    val_fraction: float = 0.10
    test_fraction: float = 0.20
    seed: int = 0
    n_repeats: int = 10

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {total}, expected 1")
        if min(self.train_fraction, self.val_fraction, self.test_fraction) <= 0:
            raise ValueError("all split fractions must be positive")


def _format_value(v):
    if np.isnan(v):
        return ""
    return repr(float(v))


def save_cohort(records, directory, config_hash=None):
    """Write per-modality CSVs plus labels.csv; missing cells stay empty."""
    os.makedirs(directory, exist_ok=True)
    modalities = list(records[0].features.keys())
    prefix = f"# config_hash: {config_hash}\n" if config_hash else ""
    for m in modalities:
        d = records[0].features[m].shape[0]
        lines = ["patient_id," + ",".join(f"f{j}" for j in range(d))]
        for r in records:
            row = r.features[m].copy()
            row[r.missing[m]] = np.nan
            lines.append(r.patient_id + "," + ",".join(_format_value(v) for v in row))
        with open(os.path.join(directory, f"{m}.csv"), "w", encoding="utf-8",
                  newline="\n") as f:
            f.write(prefix + "\n".join(lines) + "\n")
    lines = ["patient_id,label"]
    lines.extend(f"{r.patient_id},{r.label}" for r in records)
    with open(os.path.join(directory, "labels.csv"), "w", encoding="utf-8",
              newline="\n") as f:
        f.write(prefix + "\n".join(lines) + "\n")


def _read_csv_rows(path):
    with open(path, encoding="utf-8") as f:
        rows = [ln.rstrip("\n") for ln in f if ln.strip() and not ln.startswith("#")]
    return [row.split(",") for row in rows]


def load_cohort(directory, modalities=None):
    """Join per-modality CSVs with labels on patient_id."""
    labels_path = os.path.join(directory, "labels.csv")
    if not os.path.exists(labels_path):
        raise CohortFormatError(f"missing labels file: {labels_path}")
    label_rows = _read_csv_rows(labels_path)
    labels = {}
    for pid, raw in label_rows[1:]:
        if pid in labels:
            raise CohortFormatError(f"duplicate patient_id {pid!r} in labels.csv")
        label = int(raw)
        if not (0 <= label < NUM_CLASSES):
            raise CohortFormatError(
                f"label {label} for patient {pid!r} outside [0, {NUM_CLASSES})"
            )
        labels[pid] = label
    if modalities is None:
        modalities = sorted(
            os.path.splitext(f)[0]
            for f in os.listdir(directory)
            if f.endswith(".csv") and f != "labels.csv"
        )
    features = {pid: {} for pid in labels}
    missing = {pid: {} for pid in labels}
    for m in modalities:
        rows = _read_csv_rows(os.path.join(directory, f"{m}.csv"))
        d = len(rows[0]) - 1
        seen = set()
        for cells in rows[1:]:
            pid = cells[0]
            if pid in seen:
                raise CohortFormatError(f"duplicate patient_id {pid!r} in {m}.csv")
            seen.add(pid)
            if pid not in labels:
                continue  # unmatched id, reported below
            if len(cells) != d + 1:
                raise CohortFormatError(
                    f"patient {pid!r} in {m}.csv has {len(cells) - 1} cells, expected {d}"
                )
            vals = np.empty(d)
            for j, cell in enumerate(cells[1:]):
                if cell == "":
                    vals[j] = np.nan
                else:
                    try:
                        vals[j] = float(cell)
                    except ValueError as exc:
                        raise CohortFormatError(
                            f"non-numeric cell {cell!r} for patient {pid!r} in {m}.csv"
                        ) from exc
            features[pid][m] = vals
            missing[pid][m] = np.isnan(vals)
        absent = set(labels) - seen
        for pid in absent:
            features[pid][m] = np.full(d, np.nan)
            missing[pid][m] = np.ones(d, dtype=bool)
    records = [
        PatientRecord(pid, features[pid], missing[pid], labels[pid])
        for pid in sorted(labels)
    ]
    return records


def check_full_scale_schema(records, schemas=FULL_SCALE_SCHEMAS):
    """Refuse cohorts whose modality widths differ from the full-scale table."""
    for s in schemas:
        width = records[0].features[s.name].shape[0]
        if width != s.native_dim:
            raise CohortFormatError(
                f"modality {s.name} has width {width}, expected {s.native_dim}"
            )


def impute_mean(records, train_ids):
    """Replace missing cells with training-set feature means (in place copy).

    Masks are preserved so reports can still see original missingness.
    """
    train_ids = set(train_ids)
    train = [r for r in records if r.patient_id in train_ids]
    if not train:
        raise ValueError("no training records to compute imputation statistics")
    modalities = list(records[0].features.keys())
    means = {}
    for m in modalities:
        block = np.vstack([r.features[m] for r in train])
        with np.errstate(invalid="ignore"):
            mean = np.nanmean(block, axis=0)
        bad = np.where(np.isnan(mean))[0]
        if bad.size:
            raise ValueError(
                f"feature f{bad[0]} of modality {m} is missing in every training row"
            )
        means[m] = mean
    out = []
    for r in records:
        feats = {}
        for m in modalities:
            vals = r.features[m].copy()
            mask = np.isnan(vals)
            vals[mask] = means[m][mask]
            feats[m] = vals
        out.append(PatientRecord(r.patient_id, feats, dict(r.missing), r.label))
    return out


def make_splits(records, spec=None):
    """n_repeats seeded shuffles into disjoint (train, val, test) id lists."""
    spec = spec if spec is not None else SplitSpec()
    n = len(records)
    if n < 10:
        raise ValueError(f"need at least 10 records to split, got {n}")
    ids = [r.patient_id for r in records]
    n_train = int(np.floor(spec.train_fraction * n))
    n_val = int(np.floor(spec.val_fraction * n))
    splits = []
    for rep in range(spec.n_repeats):
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, rep)))
        order = rng.permutation(n)
        train = [ids[i] for i in order[:n_train]]
        val = [ids[i] for i in order[n_train : n_train + n_val]]
        test = [ids[i] for i in order[n_train + n_val :]]
        splits.append((train, val, test))
    return splits


@dataclass
class SynthSpec:
    """Synthetic cohort: factors u per patient, modalities as noisy linear
    views of factor subsets, label from a score spread across modalities.

    The labeling score sums one factor from each of three modalities, so
    no single modality determines the class; thresholds place class
    frequencies near the configured priors.
    """

    n_patients: int = 600
    modality_dims: dict = field(
        default_factory=lambda: {
            "CT": 128,
            "Genomic": 64,
            "Demographic": 8,
            "Clinical": 128,
            "Regimen": 64,
            "Continuous": 4,
        }
    )
    n_factors: int = 8
    noise_scale: float = 0.1
    class_priors: tuple = (0.25, 0.10, 0.30, 0.25, 0.10)
    # factors visible per modality; factors 0..2 are the label carriers
    label_factors: tuple = (0, 1, 2)
    label_modalities: tuple = ("CT", "Genomic", "Clinical")

    def __post_init__(self):
        if any(d < 4 for d in self.modality_dims.values()):
            raise ValueError("every synthetic modality needs dimension >= 4")
        if abs(sum(self.class_priors) - 1.0) > 1e-9:
            raise ValueError(f"class priors sum to {sum(self.class_priors)}")


def _visible_factors(spec, modality):
    shared = list(range(len(spec.label_factors), spec.n_factors))
    vis = list(shared)
    for f, m in zip(spec.label_factors, spec.label_modalities):
        if m == modality:
            vis.append(f)
    return sorted(vis)


def synth_generate(spec=None, seed=0):
    """Generate a synthetic cohort; returns (records, metadata dict)."""
    from scipy.stats import norm

    spec = spec if spec is not None else SynthSpec()
    rng = np.random.default_rng(seed)
    n, f = spec.n_patients, spec.n_factors
    u = rng.standard_normal((n, f))
    score = u[:, list(spec.label_factors)].sum(axis=1)
    # thresholds of the N(0, n_label_factors) score at cumulative priors
    sigma = np.sqrt(len(spec.label_factors))
    cum = np.cumsum(spec.class_priors)[:-1]
    thresholds = norm.ppf(cum, scale=sigma)
    labels = np.searchsorted(thresholds, score)
    records = []
    mixers = {}
    for m, d in spec.modality_dims.items():
        vis = _visible_factors(spec, m)
        mixers[m] = (vis, rng.standard_normal((len(vis), d)))
    noise = {
        m: rng.standard_normal((n, d)) * spec.noise_scale
        for m, d in spec.modality_dims.items()
    }
    width = len(str(n - 1))
    for i in range(n):
        feats = {}
        missing = {}
        for m, d in spec.modality_dims.items():
            vis, g = mixers[m]
            feats[m] = u[i, vis] @ g + noise[m][i]
            missing[m] = np.zeros(d, dtype=bool)
        records.append(
            PatientRecord(f"p{i:0{width}d}", feats, missing, int(labels[i]))
        )
    meta = {
        "seed": seed,
        "n_patients": n,
        "class_priors": list(spec.class_priors),
        "class_counts": [int((labels == c).sum()) for c in range(NUM_CLASSES)],
        "thresholds": [float(t) for t in thresholds],
        "noise_scale": spec.noise_scale,
    }
    return records, meta


def feature_matrix(records, modality):
    return np.vstack([r.features[modality] for r in records])


def records_by_id(records):
    return {r.patient_id: r for r in records}
