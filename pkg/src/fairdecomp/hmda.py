"""HMDA Loan Application Register ingestion and cohort construction.

Parses public LAR CSV extracts (2018+ schema), applies the cohort filters
(conventional first-lien purchase applications, originated or denied,
self-identified non-Hispanic white vs Black applicants), derives the four
financial mediators, and emits a validated audit dataset with exact
attrition accounting: every input row lands in the cohort or in exactly
one exclusion reason.

Raw records hold field values verbatim; all numeric coercion happens at
derivation time.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field

import numpy as np

from .dataset import AuditDataset
from .errors import EmptyCohort, SchemaMismatch

REQUIRED_COLUMNS = (
    "action_taken",
    "loan_type",
    "loan_purpose",
    "lien_status",
    "derived_race",
    "derived_ethnicity",
    "state_code",
    "loan_amount",
    "property_value",
    "income",
    "debt_to_income_ratio",
    "interest_rate",
    "denial_reason-1",
    "tract_minority_population_percent",
    "tract_to_msa_income_percentage",
)

OPTIONAL_COLUMNS = (
    "census_tract",
    "county_code",
    "denial_reason-2",
    "denial_reason-3",
    "denial_reason-4",
    "activity_year",
)

ACTION_ORIGINATED = "1"
ACTION_DENIED = "3"
DENIAL_REASON_CREDIT_HISTORY = "3"

# HMDA reports DTI exactly for 36..49 and in bins elsewhere; bins map to
# midpoints, the open top bin to 65. Exempt and missing rows are excluded.
DTI_BIN_MIDPOINTS = {
    "<20%": 10.0,
    "20%-<30%": 25.0,
    "30%-<36%": 33.0,
    "36%-<50%": 43.0,
    "50%-60%": 55.0,
    ">60%": 65.0,
}


@dataclass(frozen=True)
class LarRecord:
    """One LAR row, fields verbatim as strings."""

    action_taken: str
    loan_type: str
    loan_purpose: str
    lien_status: str
    derived_race: str
    derived_ethnicity: str
    state: str
    loan_amount: str
    property_value: str
    income: str
    dti: str
    interest_rate: str
    denial_reasons: tuple[str, ...]
    tract_minority_pct: str
    tract_msa_income_pct: str
    census_tract: str = ""
    county_code: str = ""
    activity_year: str = ""


@dataclass(frozen=True)
class CohortConfig:
    """Cohort filters; echoed verbatim into the audit report."""

    state: str = "NY"
    year: str | None = None
    loan_type: str = "1"       # conventional
    loan_purpose: str = "1"    # home purchase
    lien_status: str = "1"     # first lien
    actions: tuple[str, ...] = (ACTION_ORIGINATED, ACTION_DENIED)
    reference_race: str = "White"
    reference_ethnicity: str = "Not Hispanic or Latino"
    comparison_race: str = "Black or African American"
    min_tract_cell: int = 25
    min_county_cell: int = 5
    credit_history_quintile: int = 1
    other_denial_quintile: int = 2

    def to_dict(self) -> dict:
        return {
            "state": self.state,
            "year": self.year,
            "loan_type": self.loan_type,
            "loan_purpose": self.loan_purpose,
            "lien_status": self.lien_status,
            "actions": list(self.actions),
            "reference_race": self.reference_race,
            "reference_ethnicity": self.reference_ethnicity,
            "comparison_race": self.comparison_race,
            "min_tract_cell": self.min_tract_cell,
            "min_county_cell": self.min_county_cell,
            "credit_history_quintile": self.credit_history_quintile,
            "other_denial_quintile": self.other_denial_quintile,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CohortConfig":
        kwargs = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        if "actions" in kwargs:
            kwargs["actions"] = tuple(str(x) for x in kwargs["actions"])
        return cls(**kwargs)


@dataclass
class ParseResult:
    records: list[LarRecord]
    skipped: int


def parse_lar(source) -> ParseResult:
    """Parse a LAR CSV (path, file object, or text) into raw records.

    Malformed rows are counted and skipped. Raises SchemaMismatch when a
    required column is absent from the header.
    """
    if isinstance(source, (str, bytes)) and "\n" in str(source):
        fh = io.StringIO(str(source))
        close = False
    elif hasattr(source, "read"):
        fh = source
        close = False
    else:
        fh = open(source, newline="", encoding="utf-8")
        close = True
    try:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaMismatch(f"LAR file is missing required columns: {missing}")
        records = []
        skipped = 0
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                skipped += 1
                continue
            reasons = tuple(
                row[c].strip()
                for c in ("denial_reason-1", "denial_reason-2", "denial_reason-3", "denial_reason-4")
                if c in row and row[c] and row[c].strip()
            )
            records.append(
                LarRecord(
                    action_taken=row["action_taken"].strip(),
                    loan_type=row["loan_type"].strip(),
                    loan_purpose=row["loan_purpose"].strip(),
                    lien_status=row["lien_status"].strip(),
                    derived_race=row["derived_race"].strip(),
                    derived_ethnicity=row["derived_ethnicity"].strip(),
                    state=row["state_code"].strip(),
                    loan_amount=row["loan_amount"].strip(),
                    property_value=row["property_value"].strip(),
                    income=row["income"].strip(),
                    dti=row["debt_to_income_ratio"].strip(),
                    interest_rate=row["interest_rate"].strip(),
                    denial_reasons=reasons,
                    tract_minority_pct=row["tract_minority_population_percent"].strip(),
                    tract_msa_income_pct=row["tract_to_msa_income_percentage"].strip(),
                    census_tract=row.get("census_tract", "").strip(),
                    county_code=row.get("county_code", "").strip(),
                    activity_year=row.get("activity_year", "").strip(),
                )
            )
        return ParseResult(records=records, skipped=skipped)
    finally:
        if close:
            fh.close()


def _to_float(value: str) -> float | None:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None


def parse_dti(value: str) -> float | None:
    """Numeric DTI, with categorical bins mapped to midpoints."""
    num = _to_float(value)
    if num is not None:
        return num
    return DTI_BIN_MIDPOINTS.get(value)


def derive_quintiles(values, cell_keys) -> np.ndarray:
    """Within-cell rank quintiles, 1..5.

    Ties break by stable input order; a cell with a single distinct value
    gets quintile 3 throughout. A pure function of (values, cells).
    """
    values = np.asarray(values, dtype=np.float64)
    keys = np.asarray(cell_keys)
    out = np.empty(len(values), dtype=np.int64)
    for key in np.unique(keys):
        rows = np.flatnonzero(keys == key)
        vals = values[rows]
        if len(np.unique(vals)) == 1:
            out[rows] = 3
            continue
        order = np.argsort(vals, kind="stable")
        ranks = np.empty(len(rows), dtype=np.int64)
        ranks[order] = np.arange(len(rows))
        out[rows] = ranks * 5 // len(rows) + 1
    return out


@dataclass(frozen=True)
class CreditScoreStats:
    """Cohort-level statistics needed to impute a credit-score quintile."""

    rate_edges: tuple[float, ...]  # interior quantile edges of originated rates
    median_quintile: int
    credit_history_quintile: int = 1
    other_denial_quintile: int = 2


def impute_credit_score_quintile(record: LarRecord, stats: CreditScoreStats) -> tuple[int, bool]:
    """(quintile, rate_was_missing).

    Originated loans map through inverted interest-rate quintiles (lowest
    rate -> 5); denied applications map through denial reason codes.
    """
    if record.action_taken == ACTION_DENIED:
        if DENIAL_REASON_CREDIT_HISTORY in record.denial_reasons:
            return stats.credit_history_quintile, False
        return stats.other_denial_quintile, False
    rate = _to_float(record.interest_rate)
    if rate is None:
        return stats.median_quintile, True
    rate_q = int(np.searchsorted(stats.rate_edges, rate, side="right")) + 1
    return 6 - rate_q, False


_FILTER_ORDER = (
    "state",
    "year",
    "loan_type",
    "loan_purpose",
    "lien_status",
    "action_taken",
    "race_ethnicity",
    "missing dti",
    "cannot derive LTV",
    "missing income",
    "missing tract covariates",
)


@dataclass
class CohortResult:
    dataset: AuditDataset
    attrition: dict[str, int]
    n_input: int
    n_cohort: int
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "n_cohort": self.n_cohort,
            "attrition": dict(self.attrition),
            "notes": dict(self.notes),
        }


def _first_filter_failure(r: LarRecord, config: CohortConfig) -> str | None:
    if r.state != config.state:
        return "state"
    if config.year is not None and r.activity_year and r.activity_year != str(config.year):
        return "year"
    if r.loan_type != config.loan_type:
        return "loan_type"
    if r.loan_purpose != config.loan_purpose:
        return "loan_purpose"
    if r.lien_status != config.lien_status:
        return "lien_status"
    if r.action_taken not in config.actions:
        return "action_taken"
    is_reference = (
        r.derived_race == config.reference_race
        and r.derived_ethnicity == config.reference_ethnicity
    )
    is_comparison = r.derived_race == config.comparison_race
    if not (is_reference or is_comparison):
        return "race_ethnicity"
    if parse_dti(r.dti) is None:
        return "missing dti"
    amount = _to_float(r.loan_amount)
    value = _to_float(r.property_value)
    if amount is None or value is None or value <= 0:
        return "cannot derive LTV"
    if _to_float(r.income) is None:
        return "missing income"
    if _to_float(r.tract_minority_pct) is None or _to_float(r.tract_msa_income_pct) is None:
        return "missing tract covariates"
    return None


def build_cohort(records: list[LarRecord], config: CohortConfig | None = None) -> CohortResult:
    """Apply all filters and derive mediators.

    Mediators, in column order: DTI (percent), LTV (loan amount over
    property value), income quintile within census-tract cells (small
    tracts merge to county, then statewide), and imputed credit-score
    quintile. Covariates: tract-to-MSA income percentage and tract
    minority population percentage.
    """
    config = config or CohortConfig()
    attrition = {reason: 0 for reason in _FILTER_ORDER}
    kept: list[LarRecord] = []
    for r in records:
        reason = _first_filter_failure(r, config)
        if reason is None:
            kept.append(r)
        else:
            attrition[reason] += 1
    if not kept:
        raise EmptyCohort("no records survive the cohort filters")

    n = len(kept)
    a = np.array(
        [1.0 if r.derived_race == config.comparison_race else 0.0 for r in kept]
    )
    y = np.array([1.0 if r.action_taken == ACTION_DENIED else 0.0 for r in kept])
    dti = np.array([parse_dti(r.dti) for r in kept], dtype=np.float64)
    ltv = np.array(
        [_to_float(r.loan_amount) / _to_float(r.property_value) for r in kept]
    )
    income = np.array([_to_float(r.income) for r in kept], dtype=np.float64)
    w = np.column_stack(
        [
            np.array([_to_float(r.tract_msa_income_pct) for r in kept]),
            np.array([_to_float(r.tract_minority_pct) for r in kept]),
        ]
    )

    # Income quintile cells: census tract, merged upward when thin.
    county_keys = [f"county:{r.county_code}" if r.county_code else "state" for r in kept]
    tract_keys = [
        f"tract:{r.census_tract}" if r.census_tract else ck
        for r, ck in zip(kept, county_keys)
    ]
    tract_counts: dict[str, int] = {}
    for key in tract_keys:
        tract_counts[key] = tract_counts.get(key, 0) + 1
    county_counts: dict[str, int] = {}
    for key in county_keys:
        county_counts[key] = county_counts.get(key, 0) + 1
    cells = []
    for tk, ck in zip(tract_keys, county_keys):
        if tract_counts[tk] >= config.min_tract_cell:
            cells.append(tk)
        elif county_counts[ck] >= config.min_county_cell:
            cells.append(ck)
        else:
            cells.append("state")
    income_q = derive_quintiles(income, cells).astype(np.float64)

    # Credit-score quintile from interest-rate quintiles / denial reasons.
    originated_rates = [
        _to_float(r.interest_rate)
        for r in kept
        if r.action_taken == ACTION_ORIGINATED and _to_float(r.interest_rate) is not None
    ]
    if originated_rates:
        edges = tuple(np.quantile(originated_rates, [0.2, 0.4, 0.6, 0.8]).tolist())
        provisional = CreditScoreStats(
            rate_edges=edges,
            median_quintile=3,
            credit_history_quintile=config.credit_history_quintile,
            other_denial_quintile=config.other_denial_quintile,
        )
        with_rate = [
            impute_credit_score_quintile(r, provisional)[0]
            for r in kept
            if r.action_taken == ACTION_ORIGINATED and _to_float(r.interest_rate) is not None
        ]
        median_q = int(statistics.median(with_rate)) if with_rate else 3
    else:
        edges = ()
        median_q = 3
    stats = CreditScoreStats(
        rate_edges=edges,
        median_quintile=median_q,
        credit_history_quintile=config.credit_history_quintile,
        other_denial_quintile=config.other_denial_quintile,
    )
    score_q = np.empty(n)
    n_rate_imputed = 0
    for i, r in enumerate(kept):
        q, was_missing = impute_credit_score_quintile(r, stats)
        score_q[i] = float(q)
        n_rate_imputed += int(was_missing)

    dataset = AuditDataset(
        w=w,
        a=a,
        m=np.column_stack([dti, ltv, income_q, score_q]),
        y=y,
        w_names=("tract_income_pct", "tract_minority_pct"),
        m_names=("dti", "ltv", "income_quintile", "credit_score_quintile"),
        a_name="race",
        y_name="denial",
        group_labels=("non-Hispanic White", "Black or African American"),
    )
    attrition = {k: v for k, v in attrition.items() if v}
    notes = {
        "config": config.to_dict(),
        "dti_bin_midpoints": dict(DTI_BIN_MIDPOINTS),
        "credit_score_rule": {
            "originated": "inverted interest-rate quintile (lowest rate -> 5)",
            "denied_credit_history_reason": config.credit_history_quintile,
            "denied_other_reason": config.other_denial_quintile,
            "originated_missing_rate": f"cohort median quintile ({median_q})",
        },
        "rate_quintile_edges": list(stats.rate_edges),
        "n_rate_imputed": n_rate_imputed,
    }
    return CohortResult(
        dataset=dataset,
        attrition=attrition,
        n_input=len(records),
        n_cohort=n,
        notes=notes,
    )


def group_summary(dataset: AuditDataset) -> dict:
    """Per-group means used for descriptive reporting."""
    out: dict[str, dict[str, float]] = {}
    for arm, label in enumerate(dataset.group_labels):
        mask = dataset.a == arm
        stats = {"n": int(mask.sum()), "denial_rate": float(dataset.y[mask].mean())}
        for j, name in enumerate(dataset.m_names):
            stats[f"mean_{name}"] = float(dataset.m[mask, j].mean())
        for j, name in enumerate(dataset.w_names):
            stats[f"mean_{name}"] = float(dataset.w[mask, j].mean())
        out[label] = stats
    return out
