import numpy as np
import pytest

from emwf import make_grid, states
from emwf.classifier import EMWF
from emwf.dynamics import evolve
from emwf.errors import GridError
from emwf.mixtures import (
    MixtureComponent,
    MixtureWarning,
    classicality_check,
    mixture_expectation,
    reduced_density,
    residual_series,
)
from emwf.potentials import TwoBodyPotential, free, harmonic

G = make_grid(2, 20.0, 128)
V = TwoBodyPotential(free(1), harmonic(1.0))
G1 = G.sub([0])


def _pair(x1, p1, x2, p2):
    return states.product(states.coherent(G1, 1.0, x1, p1), states.coherent(G1, 1.0, x2, p2))


def _run(psi, t_final=0.5):
    return evolve(psi, V, t_final, 1e-3, 5)


@pytest.fixture(scope="module")
def coherent_records():
    return [_run(_pair(1.0, 0.0, -1.0, 0.5)), _run(_pair(2.0, -0.5, 0.5, 0.0)), _run(_pair(-1.5, 0.3, 1.0, -0.2))]


@pytest.fixture(scope="module")
def cat_record():
    cat = states.superposition([_pair(1.0, 0.0, 1.0, 0.0), _pair(-1.0, 0.0, -1.0, 0.0)], [1, 1])
    return _run(cat)


def test_coherent_mixture_is_classical(coherent_records):
    ens = reduced_density(zip([0.5, 0.3, 0.2], coherent_records))
    rep = classicality_check(ens)
    assert rep.passed
    assert all(c.verdict == EMWF for c in rep.components)
    for i, j in ((0, 0),):
        _, res = residual_series(ens, i, j)
        assert np.max(res) < 1e-6


def test_cat_component_flips_flag(coherent_records, cat_record):
    ens = reduced_density(zip([0.4, 0.2, 0.2, 0.2], coherent_records + [cat_record]))
    rep = classicality_check(ens)
    assert not rep.passed
    bad = rep.components[3]
    assert not bad.passed and bad.cross > 1e-3
    _, res = residual_series(ens)
    assert np.max(res) > 1e-3
    with pytest.warns(MixtureWarning):
        out = mixture_expectation(ens, 0, 0, 0.25, classicality=rep)
    assert out.warning


def test_mixture_expectation_hand_computed(coherent_records):
    # product states: <x1 x2> factorizes per component, so the quantum value is a weighted product of means
    ens = reduced_density(zip([0.6, 0.4], coherent_records[:2]))
    t = 0.25
    out = mixture_expectation(ens, 0, 0, t)
    k = int(round(t / 5e-3))
    expect = sum(w * r.positions[k, 0] * r.positions[k, 1] for w, r in zip([0.6, 0.4], coherent_records[:2]))
    assert out.quantum == pytest.approx(expect, abs=1e-10)
    assert out.classical == pytest.approx(expect, abs=1e-12)
    assert ens.density(k).sum() * G.cell_volume == pytest.approx(1.0, abs=1e-10)


def test_trajectory_only_components():
    t = np.linspace(0, 1, 11)
    a = MixtureComponent(0.5, times=t, x1=np.cos(t), x2=np.sin(t))
    b = MixtureComponent(0.5, times=t, x1=np.ones_like(t), x2=2 * np.ones_like(t))
    ens = reduced_density([a, b])
    out = mixture_expectation(ens, 0, 0, 0.5)
    assert np.isnan(out.quantum)
    assert out.classical == pytest.approx(0.5 * np.cos(0.5) * np.sin(0.5) + 1.0)
    assert classicality_check(ens).passed
    with pytest.raises(ValueError):
        mixture_expectation(ens, 0, 0, 0.55)
    with pytest.raises(ValueError):
        mixture_expectation(ens, 0, 0, 2.0)
    with pytest.raises(ValueError):
        MixtureComponent(1.0, times=t)


def test_weight_validation(coherent_records):
    with pytest.raises(ValueError):
        reduced_density(zip([0.5, 0.3], coherent_records[:2]))
    with pytest.raises(ValueError):
        reduced_density(zip([1.5, -0.5], coherent_records[:2]))
    with pytest.raises(ValueError):
        reduced_density([])
    other = evolve(states.product(states.coherent(make_grid(1, 20.0, 64), 1.0, 0.5),
                                  states.coherent(make_grid(1, 20.0, 64), 1.0, -0.5)),
                   TwoBodyPotential(free(1), harmonic(1.0)), 0.05, 1e-3, 5)
    with pytest.raises(GridError):
        reduced_density(zip([0.5, 0.5], [coherent_records[0], other]))
