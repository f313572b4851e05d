import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from queuechannel.channels import (
    EB_P_MIN,
    ChannelFamily,
    GadChannel,
    PauliChannel,
    apply_channel,
    apply_gad,
    apply_pauli,
    eb_threshold,
    gad_bloch_map,
    gad_to_pauli,
    has_waiting_invariant_maximizer,
    induced_axis_crossovers,
    is_entanglement_breaking,
    is_pauli_ordered,
    is_unital,
    m_phi,
    optimal_code,
)
from queuechannel.qubit_core import BlochVector, DensityOperator, bloch_to_density

from oracles import gad_kraus_apply, pauli_kraus_apply, pauli_max_overlap
from test_qubit_core import random_bloch


def random_pauli(rng) -> PauliChannel:
    # uniform on the probability simplex of (p0, p1, p2, p3)
    p = rng.dirichlet(np.ones(4))
    return PauliChannel(*p[1:])


@st.composite
def pauli_channels(draw):
    w = [draw(st.floats(0.0, 1.0)) for _ in range(4)]
    s = sum(w)
    if s == 0.0:
        return PauliChannel(0.0, 0.0, 0.0)
    return PauliChannel(*(min(x / s, 1.0) for x in w[1:]))


class TestPauli:
    def test_examples(self):
        r = BlochVector(0.3, -0.2, 0.5)
        out = apply_pauli(PauliChannel(0, 0, 0), r)
        np.testing.assert_allclose(out.as_array(), r.as_array(), atol=1e-15)
        out = apply_pauli(PauliChannel(0.25, 0.25, 0.25), r)
        np.testing.assert_allclose(out.as_array(), 0.0, atol=1e-15)
        out = apply_pauli(PauliChannel(0.1, 0, 0), BlochVector(0, 0, 1))
        np.testing.assert_allclose(out.as_array(), [0, 0, 0.8], atol=1e-15)

    def test_matches_explicit_conjugation(self):
        rng = np.random.default_rng(3)
        for v in random_bloch(rng, 2000):
            ch = random_pauli(rng)
            got = apply_pauli(ch, BlochVector(*v)).as_array()
            np.testing.assert_allclose(got, pauli_kraus_apply(ch.probs, v), atol=1e-12)

    def test_density_in_density_out(self):
        rho = bloch_to_density(BlochVector(0.1, 0.2, 0.3))
        assert isinstance(apply_pauli(PauliChannel(0.1, 0.1, 0.1), rho), DensityOperator)

    def test_validation(self):
        with pytest.raises(ValueError):
            PauliChannel(0.5, 0.4, 0.3)
        with pytest.raises(ValueError):
            PauliChannel(-0.1, 0.0, 0.0)

    def test_kraus_completeness(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            ks = random_pauli(rng).kraus_operators()
            np.testing.assert_allclose(sum(k.conj().T @ k for k in ks), np.eye(2), atol=1e-12)

    @given(pauli_channels())
    def test_m_phi_range(self, ch):
        lam = ch.attenuations
        assert np.all(np.abs(lam) <= 1 + 1e-12)
        assert 0.5 <= m_phi(ch) <= 1.0
        assert is_unital(ch)


class TestGad:
    def test_examples(self):
        r = BlochVector(0.3, 0.4, -0.5)
        np.testing.assert_allclose(apply_gad(GadChannel(0, 0.3), r).as_array(), r.as_array(), atol=1e-15)
        np.testing.assert_allclose(apply_gad(GadChannel(1, 0), r).as_array(), [0, 0, 1], atol=1e-15)
        np.testing.assert_allclose(apply_gad(GadChannel(0.5, 0.5), BlochVector(0, 0, 1)).as_array(), [0, 0, 0.5], atol=1e-15)

    def test_kraus_bloch_agreement(self):
        rng = np.random.default_rng(5)
        pn = rng.random((10_000, 2))
        rs = random_bloch(rng, 10_000)
        bloch = gad_bloch_map(pn[:, 0], pn[:, 1], rs)
        worst = 0.0
        for (p, n), r, b in zip(pn, rs, bloch):
            kraus = apply_gad(GadChannel(p, n), BlochVector(*r)).as_array()
            worst = max(worst, np.max(np.abs(kraus - b)))
        assert worst <= 1e-12

    def test_kraus_matches_independent_matrices(self):
        rng = np.random.default_rng(6)
        for (p, n), r in zip(rng.random((500, 2)), random_bloch(rng, 500)):
            got = apply_gad(GadChannel(p, n), BlochVector(*r)).as_array()
            np.testing.assert_allclose(got, gad_kraus_apply(p, n, r), atol=1e-12)

    def test_kraus_completeness(self):
        for p in np.linspace(0, 1, 11):
            for n in np.linspace(0, 1, 11):
                ks = GadChannel(p, n).kraus_operators()
                np.testing.assert_allclose(sum(k.conj().T @ k for k in ks), np.eye(2), atol=1e-12)

    def test_trace_and_positivity(self):
        rng = np.random.default_rng(7)
        for (p, n), r in zip(rng.random((10_000, 2)), random_bloch(rng, 10_000)):
            out = apply_channel(GadChannel(p, n), bloch_to_density(BlochVector(*r)))
            assert abs(np.trace(out.matrix) - 1) <= 1e-12
            assert out.eigenvalues().min() >= -1e-12

    def test_convex_decomposition(self):
        rng = np.random.default_rng(8)
        for (p, n), r in zip(rng.random((1000, 2)), random_bloch(rng, 1000)):
            v = BlochVector(*r)
            mix = (1 - n) * apply_gad(GadChannel(p, 0), v).as_array() + n * apply_gad(GadChannel(p, 1), v).as_array()
            np.testing.assert_allclose(apply_gad(GadChannel(p, n), v).as_array(), mix, atol=1e-12)

    def test_gad_to_pauli_examples(self):
        assert gad_to_pauli(0).probs == (0, 0, 0)
        np.testing.assert_allclose(gad_to_pauli(1).probs, [0.25, 0.25, 0.25], atol=1e-15)
        np.testing.assert_allclose(gad_to_pauli(0.75).probs, [0.1875, 0.1875, 0.0625], atol=1e-15)
        np.testing.assert_allclose(gad_to_pauli(0.75).attenuations, [0.5, 0.5, 0.25], atol=1e-15)

    def test_gad_to_pauli_action(self):
        rng = np.random.default_rng(9)
        for p, r in zip(rng.random(1000), random_bloch(rng, 1000)):
            v = BlochVector(*r)
            a = apply_pauli(gad_to_pauli(p), v).as_array()
            b = apply_gad(GadChannel(p, 0.5), v).as_array()
            np.testing.assert_allclose(a, b, atol=1e-12)

    def test_unitality(self):
        assert is_unital(GadChannel(0.3, 0.5))
        assert not is_unital(GadChannel(0.3, 0.2))

    def test_entanglement_breaking(self):
        assert EB_P_MIN == pytest.approx(2 * (math.sqrt(2) - 1))
        for n in np.linspace(0, 1, 11):
            assert not is_entanglement_breaking(GadChannel(0.5, n))
        assert is_entanglement_breaking(GadChannel(1.0, 0.5))
        assert is_entanglement_breaking(GadChannel(0.9, 0.5))
        width = math.sqrt(0.41) / 0.9
        assert is_entanglement_breaking(GadChannel(0.9, 0.5 - width / 2 + 1e-9))
        assert not is_entanglement_breaking(GadChannel(0.9, 0.5 - width / 2 - 1e-9))

    def test_eb_threshold_is_region_boundary(self):
        for n in [0.05, 0.2, 0.35, 0.5, 0.8]:
            ps = eb_threshold(n)
            assert not is_entanglement_breaking(GadChannel(ps - 1e-7, n))
            assert is_entanglement_breaking(GadChannel(min(ps + 1e-7, 1.0), n))
        assert eb_threshold(0.5) == pytest.approx(EB_P_MIN)
        assert eb_threshold(0.0) == 1.0


class TestOptimalCode:
    def test_examples(self):
        code = optimal_code(PauliChannel(0.1, 0, 0))
        assert code.axis == 1 and code.m_phi == pytest.approx(1.0)
        code = optimal_code(gad_to_pauli(0.5))
        assert code.axis in (1, 2)
        assert code.m_phi == pytest.approx((1 + math.sqrt(0.5)) / 2, abs=1e-15)
        code = optimal_code(PauliChannel(0.1, 0.2, 0.3))
        assert code.axis == 3 and code.m_phi == pytest.approx(0.7, abs=1e-15)

    def test_m_phi_of_unital_gad(self):
        for p in np.linspace(0, 1, 21):
            assert m_phi(gad_to_pauli(p)) == pytest.approx((1 + math.sqrt(1 - p)) / 2, abs=1e-14)

    def test_ties_choose_smallest_index(self):
        assert optimal_code(PauliChannel(0, 0, 0)).axis == 1
        # lambda = (0.8, 0.8, 0.6) and (0.6, 0.8, 0.8)
        assert optimal_code(PauliChannel(0.1, 0.1, 0.0)).axis == 1
        assert optimal_code(PauliChannel(0.0, 0.1, 0.1)).axis == 2

    def test_negative_attenuation_flips_projector(self):
        code = optimal_code(PauliChannel(0.0, 0.0, 0.9))
        # lambda = (-0.8, -0.8, 1): z wins
        assert code.axis == 3
        code = optimal_code(PauliChannel(0.0, 0.95, 0.0))
        # lambda = (-0.9, 1, -0.9)
        assert code.axis == 2
        code = optimal_code(PauliChannel(0.45, 0.45, 0.05))
        # lambda = (0, 0, -0.8)
        assert code.axis == 3
        np.testing.assert_allclose(code.measurement.as_array(), [0, 0, -1])

    def test_code_attains_grid_maximum(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            ch = random_pauli(rng)
            code = optimal_code(ch)
            out = apply_pauli(ch, code.encoding).as_array()
            attained = 0.5 * (1 + out @ code.measurement.as_array())
            assert attained == pytest.approx(code.m_phi, abs=1e-12)
            assert abs(pauli_max_overlap(ch.probs) - code.m_phi) <= 1e-6
            assert code.encoding.norm == pytest.approx(1) and code.measurement.norm == pytest.approx(1)

    @given(pauli_channels())
    @settings(max_examples=200)
    def test_code_overlap_matches_m_phi(self, ch):
        code = optimal_code(ch)
        out = apply_pauli(ch, code.encoding).as_array()
        assert 0.5 * (1 + out @ code.measurement.as_array()) == pytest.approx(code.m_phi, abs=1e-12)


class TestFamilies:
    grid = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 200)])

    @pytest.mark.parametrize("kappa", [0.01, 0.2, 1.0, 10.0])
    def test_symmetric_gad_is_pauli_ordered(self, kappa):
        fam = ChannelFamily.symmetric_gad(kappa)
        assert is_pauli_ordered(fam, self.grid)
        assert has_waiting_invariant_maximizer(fam, self.grid)

    def test_depolarizing_is_pauli_ordered(self):
        assert is_pauli_ordered(ChannelFamily.depolarizing(0.3), self.grid)

    def test_switching_family_is_not_ordered(self):
        fam = ChannelFamily.from_callable(lambda w: PauliChannel(0.3, 0, 0) if w < 0.5 else PauliChannel(0, 0, 0.3))
        assert not is_pauli_ordered(fam, [0.0, 1.0])
        assert not has_waiting_invariant_maximizer(fam, [0.0, 1.0])

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            is_pauli_ordered(ChannelFamily.symmetric_gad(0.1), [])

    def test_crossovers(self):
        b = induced_axis_crossovers(np.array([0.1, 0.2, 0.3]))
        np.testing.assert_allclose(b, [0.5, 0.6, 0.7])

    def test_family_matches_gad(self):
        fam = ChannelFamily.symmetric_gad(0.3)
        for w in [0.0, 0.5, 2.0, 10.0]:
            p = -math.expm1(-0.3 * w)
            np.testing.assert_allclose(fam.at(w).probs, gad_to_pauli(p).probs, atol=1e-15)

    @given(st.floats(0.0, 5.0), st.floats(0.0, 1e4))
    def test_family_channels_valid(self, kappa, w):
        fam = ChannelFamily.symmetric_gad(kappa)
        ch = fam.at(w)
        assert 0.5 <= m_phi(ch) <= 1.0
