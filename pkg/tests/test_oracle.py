import json

import numpy as np
import pytest

from fairdecomp.oracle import (
    ScmSpec,
    effects_from_observable_law,
    generate_dataset,
    observable_law,
    oracle_effects,
    preset_scm,
    random_monotone_scm,
    random_scm,
)


def test_tables_must_normalize():
    scm = random_scm(0)
    bad = scm.to_dict()
    bad["p_w"] = [0.5, 0.6]
    with pytest.raises(ValueError):
        ScmSpec.from_dict(bad).validate()


def test_positivity_enforced():
    scm = random_scm(0)
    bad = scm.to_dict()
    bad["p_a1_w"] = [0.0, 0.5]
    with pytest.raises(ValueError):
        ScmSpec.from_dict(bad).validate()


def test_monotone_scan_catches_violations():
    scm = random_monotone_scm(1)
    tables = scm.to_dict()
    p_y = np.array(tables["p_y1_amwu"])
    p_y[0, 0, 0, 0], p_y[0, -1, 0, 0] = p_y[0, -1, 0, 0], p_y[0, 0, 0, 0]
    tables["p_y1_amwu"] = p_y.tolist()
    with pytest.raises(ValueError):
        ScmSpec.from_dict(tables).validate()


def test_no_direct_edge_means_zero_direct_effects():
    scm = random_scm(3)
    tables = scm.to_dict()
    p_y = np.array(tables["p_y1_amwu"])
    p_y[1] = p_y[0]  # outcome ignores A
    tables["p_y1_amwu"] = p_y.tolist()
    eff = oracle_effects(ScmSpec.from_dict(tables))
    assert eff.nde == pytest.approx(0.0, abs=1e-14)
    assert eff.ide == pytest.approx(0.0, abs=1e-14)


def test_no_indirect_edge_means_zero_indirect_effects():
    scm = random_scm(4)
    tables = scm.to_dict()
    p_m = np.array(tables["p_m_awu"])
    p_m[1] = p_m[0]  # mediator law ignores A
    tables["p_m_awu"] = p_m.tolist()
    eff = oracle_effects(ScmSpec.from_dict(tables))
    assert eff.nie == pytest.approx(0.0, abs=1e-14)
    assert eff.iie == pytest.approx(0.0, abs=1e-14)


def test_degenerate_u_collapses_interventional_to_natural():
    for seed in range(5):
        scm = random_scm(seed, w_card=3, u_card=1, m_cards=(3, 2))
        eff = oracle_effects(scm)
        assert eff.ide == pytest.approx(eff.nde, abs=1e-13)
        assert eff.iie == pytest.approx(eff.nie, abs=1e-13)


def test_effect_additivity_identities():
    for seed in range(10):
        eff = oracle_effects(random_scm(seed, w_card=2, u_card=3, m_cards=(2, 2)))
        assert abs(eff.te - (eff.nde + eff.nie)) <= 1e-12
        psi = eff.mean_y_interventional
        assert abs((eff.ide + eff.iie) - (psi["y(1,g1)"] - psi["y(0,g0)"])) <= 1e-12


def test_identification_from_observable_law():
    # The two computation paths (structural tables vs the coarsened joint
    # P(W,A,M,Y)) must agree exactly, even with active U -> M and U -> Y.
    for seed in range(8):
        scm = random_scm(seed, w_card=3, u_card=4, m_cards=(2, 3))
        eff = oracle_effects(scm)
        ide, iie = effects_from_observable_law(observable_law(scm))
        assert abs(ide - eff.ide) <= 1e-12
        assert abs(iie - eff.iie) <= 1e-12


def test_si_special_case_plug_in_reproduces_nde():
    for seed in range(5):
        scm = random_scm(seed + 50, w_card=2, u_card=1, m_cards=(2, 2))
        ide, _ = effects_from_observable_law(observable_law(scm))
        assert ide == pytest.approx(oracle_effects(scm).nde, abs=1e-13)


def test_monotone_family_flags_and_bounds():
    for seed in range(25):
        scm = random_monotone_scm(seed)
        assert scm.monotone_in_m and scm.stochastic_dominance
        scm.validate()
        eff = oracle_effects(scm)
        assert eff.ide <= eff.nde
        assert eff.iie >= eff.nie


def test_monotone_family_distinct_specs():
    digests = {hash(random_monotone_scm(seed).to_json()) for seed in range(100)}
    assert len(digests) == 100


def test_generate_dataset_deterministic():
    scm = preset_scm("monotone-small")
    d1 = generate_dataset(scm, 5000, seed=3)
    d2 = generate_dataset(scm, 5000, seed=3)
    assert np.array_equal(d1.m, d2.m) and np.array_equal(d1.y, d2.y)
    d3 = generate_dataset(scm, 5000, seed=4)
    assert not np.array_equal(d1.m, d3.m)


def test_generate_dataset_symmetric_treatment_share():
    scm = random_scm(9, w_card=2, u_card=2, m_cards=(2, 2))
    tables = scm.to_dict()
    tables["p_a1_w"] = [0.5, 0.5]
    scm = ScmSpec.from_dict(tables)
    ds = generate_dataset(scm, 1_000_000, seed=1)
    assert ds.a.mean() == pytest.approx(0.5, abs=0.003)


def test_generate_dataset_law_of_large_numbers():
    scm = random_scm(10, w_card=2, u_card=2, m_cards=(2, 2))
    ds = generate_dataset(scm, 1_000_000, seed=2)
    # Independent derivation of P(Y=1 | A=a) from the tables.
    p_a = np.stack([1.0 - scm.p_a1_w, scm.p_a1_w])
    joint_y1 = np.einsum(
        "w,aw,u,awum,amwu->a", scm.p_w, p_a, scm.p_u, scm.p_m_awu, scm.p_y1_amwu
    )
    mass_a = np.einsum("w,aw->a", scm.p_w, p_a)
    expected = joint_y1 / mass_a
    for arm in (0, 1):
        observed = ds.y[ds.a == arm].mean()
        assert observed == pytest.approx(expected[arm], abs=0.003)


def test_generate_dataset_rejects_nonpositive_n():
    with pytest.raises(ValueError):
        generate_dataset(preset_scm("monotone-small"), 0, seed=1)


def test_scm_json_roundtrip():
    scm = random_monotone_scm(5)
    back = ScmSpec.from_dict(json.loads(json.dumps(scm.to_dict())))
    back.validate()
    assert np.allclose(back.p_m_awu, scm.p_m_awu)
    eff_a, eff_b = oracle_effects(scm), oracle_effects(back)
    assert eff_a.ide == eff_b.ide


def test_preset_monotone_small_frozen_values():
    # Regression freeze of the enumerated effects (6 decimals).
    eff = oracle_effects(preset_scm("monotone-small"))
    assert eff.ide == pytest.approx(0.061309, abs=1e-6)
    assert eff.iie == pytest.approx(0.072404, abs=1e-6)
    assert eff.nde == eff.ide and eff.nie == eff.iie  # U is degenerate


def test_preset_confounded_small_is_monotone():
    scm = preset_scm("confounded-small")
    assert scm.u_card > 1
    eff = oracle_effects(scm)
    assert eff.ide < eff.nde  # strict gap by construction


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset_scm("nope")
