import io

import numpy as np
import pytest

from fairdecomp.errors import EmptyCohort, SchemaMismatch
from fairdecomp.hmda import (
    CohortConfig,
    CreditScoreStats,
    LarRecord,
    build_cohort,
    derive_quintiles,
    group_summary,
    impute_credit_score_quintile,
    parse_dti,
    parse_lar,
)

HEADER = [
    "activity_year", "state_code", "county_code", "census_tract",
    "action_taken", "loan_type", "loan_purpose", "lien_status",
    "derived_race", "derived_ethnicity",
    "loan_amount", "property_value", "income", "debt_to_income_ratio",
    "interest_rate", "denial_reason-1", "denial_reason-2",
    "denial_reason-3", "denial_reason-4",
    "tract_minority_population_percent", "tract_to_msa_income_percentage",
]

DEFAULTS = {
    "activity_year": "2022",
    "state_code": "NY",
    "county_code": "36001",
    "census_tract": "36001000100",
    "action_taken": "1",
    "loan_type": "1",
    "loan_purpose": "1",
    "lien_status": "1",
    "derived_race": "White",
    "derived_ethnicity": "Not Hispanic or Latino",
    "loan_amount": "325000",
    "property_value": "405000",
    "income": "98",
    "debt_to_income_ratio": "38",
    "interest_rate": "5.1",
    "denial_reason-1": "10",
    "denial_reason-2": "",
    "denial_reason-3": "",
    "denial_reason-4": "",
    "tract_minority_population_percent": "21.5",
    "tract_to_msa_income_percentage": "104",
}


def lar_csv(rows, header=HEADER):
    lines = [",".join(header)]
    for overrides in rows:
        record = {**DEFAULTS, **overrides}
        lines.append(",".join(record.get(col, "") for col in header))
    return "\n".join(lines) + "\n"


def test_parse_header_only():
    result = parse_lar(io.StringIO(lar_csv([])))
    assert result.records == [] and result.skipped == 0


def test_parse_keeps_raw_strings():
    text = lar_csv([{"loan_amount": "Exempt", "debt_to_income_ratio": "20%-<30%"}])
    result = parse_lar(io.StringIO(text))
    assert result.records[0].loan_amount == "Exempt"
    assert result.records[0].dti == "20%-<30%"


def test_parse_three_row_roundtrip():
    rows = [
        {"income": "70"},
        {"income": "80", "action_taken": "3", "denial_reason-1": "3"},
        {"income": "90", "derived_race": "Black or African American"},
    ]
    result = parse_lar(io.StringIO(lar_csv(rows)))
    assert len(result.records) == 3
    assert [r.income for r in result.records] == ["70", "80", "90"]
    assert result.records[1].denial_reasons == ("3",)
    assert result.records[2].derived_race == "Black or African American"


def test_parse_counts_malformed_rows():
    text = lar_csv([{}, {}])
    text += "short,row\n"
    result = parse_lar(io.StringIO(text))
    assert len(result.records) == 2
    assert result.skipped == 1


def test_parse_missing_required_column():
    header = [c for c in HEADER if c != "debt_to_income_ratio"]
    with pytest.raises(SchemaMismatch):
        parse_lar(io.StringIO(lar_csv([{}], header=header)))


def _records(rows):
    return parse_lar(io.StringIO(lar_csv(rows))).records


def _base_cohort_rows(n_white=30, n_black=10):
    rows = []
    for i in range(n_white):
        rows.append({
            "income": str(60 + i), "interest_rate": str(4.0 + 0.05 * i),
            "action_taken": "1",
        })
    for i in range(n_black):
        rows.append({
            "derived_race": "Black or African American",
            "derived_ethnicity": "Not Hispanic or Latino",
            "income": str(50 + i), "interest_rate": str(5.0 + 0.05 * i),
            "action_taken": "3" if i % 2 == 0 else "1",
            "denial_reason-1": "3" if i % 4 == 0 else "1",
        })
    rows.append({"action_taken": "3", "denial_reason-1": "1"})  # one white denial
    return rows


def test_build_cohort_codes_and_filters():
    rows = _base_cohort_rows()
    rows += [
        {"action_taken": "4"},                       # withdrawn
        {"state_code": "NJ"},                        # other state
        {"loan_type": "2"},                          # FHA
        {"derived_race": "Asian"},                   # race out of scope
        {"property_value": ""},                      # cannot derive LTV
        {"debt_to_income_ratio": "Exempt"},          # exempt DTI
    ]
    result = build_cohort(_records(rows))
    assert result.attrition["action_taken"] == 1
    assert result.attrition["state"] == 1
    assert result.attrition["loan_type"] == 1
    assert result.attrition["race_ethnicity"] == 1
    assert result.attrition["cannot derive LTV"] == 1
    assert result.attrition["missing dti"] == 1
    # Exact attrition accounting.
    assert result.n_input == result.n_cohort + sum(result.attrition.values())
    ds = result.dataset
    assert ds.n == 41
    assert ds.a.sum() == 10
    assert ds.y.sum() == 6
    assert ds.m_names == ("dti", "ltv", "income_quintile", "credit_score_quintile")


def test_build_cohort_mediator_derivation():
    rows = [
        {"loan_amount": "200000", "property_value": "400000",
         "debt_to_income_ratio": "20%-<30%"},
        {"derived_race": "Black or African American", "action_taken": "3",
         "denial_reason-1": "3", "debt_to_income_ratio": ">60%"},
    ] + _base_cohort_rows(10, 5)
    ds = build_cohort(_records(rows)).dataset
    assert ds.m[0, 0] == 25.0  # DTI bin midpoint
    assert ds.m[0, 1] == pytest.approx(0.5)  # LTV
    assert ds.m[1, 0] == 65.0  # top DTI bin
    assert ds.m[1, 3] == 1.0   # credit-history denial reason -> lowest quintile


def test_build_cohort_hispanic_white_excluded():
    rows = _base_cohort_rows(5, 5)
    rows.append({"derived_race": "White", "derived_ethnicity": "Hispanic or Latino"})
    result = build_cohort(_records(rows))
    assert result.attrition["race_ethnicity"] == 1


def test_build_cohort_empty_raises():
    with pytest.raises(EmptyCohort):
        build_cohort(_records([{"state_code": "NJ"}]))


def test_group_summary_labels():
    summary = group_summary(build_cohort(_records(_base_cohort_rows())).dataset)
    assert summary["Black or African American"]["n"] == 10
    assert 0 <= summary["non-Hispanic White"]["denial_rate"] <= 1


def test_derive_quintiles_even_split():
    values = np.arange(10, dtype=float)
    q = derive_quintiles(values, np.zeros(10))
    assert np.bincount(q, minlength=6)[1:].tolist() == [2, 2, 2, 2, 2]
    assert (np.sort(q) == q[np.argsort(values, kind="stable")]).all()


def test_derive_quintiles_constant_cell():
    q = derive_quintiles(np.full(7, 3.3), np.zeros(7))
    assert (q == 3).all()


def test_derive_quintiles_permutation_invariant_map():
    rng = np.random.default_rng(0)
    values = rng.permutation(np.linspace(0, 1, 40))
    cells = np.zeros(40)
    q1 = derive_quintiles(values, cells)
    perm = rng.permutation(40)
    q2 = derive_quintiles(values[perm], cells)
    assert np.array_equal(q1[perm], q2)


def test_derive_quintiles_respects_cells():
    values = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0])
    cells = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1, 1])
    q = derive_quintiles(values, cells)
    assert np.array_equal(q[:5], q[5:])


def test_impute_credit_score_quintile_branches():
    stats = CreditScoreStats(rate_edges=(4.0, 4.5, 5.0, 5.5), median_quintile=3)

    def record(**overrides):
        merged = {**DEFAULTS, **overrides}
        return LarRecord(
            action_taken=merged["action_taken"],
            loan_type=merged["loan_type"],
            loan_purpose=merged["loan_purpose"],
            lien_status=merged["lien_status"],
            derived_race=merged["derived_race"],
            derived_ethnicity=merged["derived_ethnicity"],
            state=merged["state_code"],
            loan_amount=merged["loan_amount"],
            property_value=merged["property_value"],
            income=merged["income"],
            dti=merged["debt_to_income_ratio"],
            interest_rate=merged["interest_rate"],
            denial_reasons=tuple(
                merged[f"denial_reason-{i}"]
                for i in range(1, 5)
                if merged.get(f"denial_reason-{i}")
            ),
            tract_minority_pct=merged["tract_minority_population_percent"],
            tract_msa_income_pct=merged["tract_to_msa_income_percentage"],
        )

    # Originated at the lowest rates -> best quintile.
    assert impute_credit_score_quintile(record(interest_rate="3.2"), stats) == (5, False)
    # Originated at the highest rates -> worst quintile.
    assert impute_credit_score_quintile(record(interest_rate="6.5"), stats) == (1, False)
    # Denied for credit history.
    assert impute_credit_score_quintile(
        record(action_taken="3", **{"denial_reason-1": "3"}), stats
    ) == (1, False)
    # Denied for DTI.
    assert impute_credit_score_quintile(
        record(action_taken="3", **{"denial_reason-1": "1"}), stats
    ) == (2, False)
    # Originated with a missing rate -> cohort median, counted.
    assert impute_credit_score_quintile(record(interest_rate="NA"), stats) == (3, True)


def test_parse_dti_map():
    assert parse_dti("38") == 38.0
    assert parse_dti("<20%") == 10.0
    assert parse_dti("50%-60%") == 55.0
    assert parse_dti(">60%") == 65.0
    assert parse_dti("Exempt") is None
    assert parse_dti("NA") is None
    assert parse_dti("") is None


def test_cohort_config_roundtrip():
    config = CohortConfig(state="CA", comparison_race="Asian")
    back = CohortConfig.from_dict(config.to_dict())
    assert back == config
