import numpy as np
import pytest

from phrec.cancer import (ALT_FORWARD_LEVELS, INPUT_STAGES, CancerParams, build_cancer_generator,
                          cancer_rates, cancer_tables)
from phrec.counts import count_distribution
from phrec.matrix import validate_subintensity


def test_generator_rows_close():
    m = build_cancer_generator()
    validate_subintensity(m.T)
    G = np.column_stack([m.t0, m.T])
    assert np.allclose(G.sum(axis=1), 0.0, atol=1e-15)
    assert m.k == 6 and m.n == 5 and m.label(0) == "R"


def test_death_rates():
    P = CancerParams()
    _, d = cancer_rates(P)
    mort = lambda i: P.a + P.q * i ** P.p
    assert d[30] == pytest.approx(1.0 + mort(5))
    assert d[1] == pytest.approx(1e-5 + mort(1))
    assert d[6] == pytest.approx(1e-4 + mort(1))


def test_sparsity_pattern():
    R, _ = cancer_rates()
    assert R[5, 6] == 0.0          # no advance across a stage boundary
    assert R[1, 2] == 0.2
    assert R[6, 1] == pytest.approx(0.1)
    assert R[11, 6] == pytest.approx(0.2)
    assert R[30, 26] == 0.0         # stage 4 only moves back by recovery


def test_forward_readings_differ():
    fwd, _ = cancer_rates()
    alt, _ = cancer_rates(forward_levels=ALT_FORWARD_LEVELS)
    assert fwd[6, 11] > 0 and fwd[26, 31 - 1] == 0
    assert alt[6, 11] > 0 and alt[1, 6] > 0
    assert not np.array_equal(fwd, alt)


@pytest.mark.parametrize("stage", INPUT_STAGES)
def test_count_mass(stage):
    m = build_cancer_generator(input_stage=stage)
    i = m.stage_index(stage)
    d = count_distribution(m, i, [6.0, 36.0], 6)
    deficit = 1 - np.cumsum(d.probs, axis=1)
    assert np.all(deficit >= -1e-9)
    assert np.all(np.diff(deficit, axis=1) <= 1e-12)
    # the mass missing from l <= 2 is recovered by higher counts
    assert np.all(deficit[:, -1] < 5e-4)


def test_tables_shape_and_anchor():
    tab = cancer_tables()
    assert tab.counts.shape == (5, 3, 4)
    assert tab.counts[0, 0, 0] == pytest.approx(0.5382, abs=1e-3)
    assert np.all(tab.between >= 0)
    assert len(list(tab.count_rows())) == 5 * 3 * 4
