import numpy as np
import pytest

from tarifflens.assess import assess_scheme
from tarifflens.cluster import fit_dataset
from tarifflens.core import normalize
from tarifflens.errors import UnknownDay, ValidationError
from tarifflens.synth import Archetype, SynthSpec, default_archetypes, generate, optimal_scheme, optimal_schemes, spec_from_dict


def test_zero_jitter_identical_shapes():
    arch = default_archetypes(jitter=0.0)[1]
    d, _ = generate(SynthSpec([arch], consumers_per_archetype=5, days=1))
    W = np.stack([normalize(p).weights for p in d.profiles.values()])
    np.testing.assert_allclose(W, np.tile(W[0], (len(W), 1)), rtol=0, atol=1e-15)


def test_same_seed_same_data():
    spec = SynthSpec(default_archetypes()[:2], consumers_per_archetype=3, days=2, rng_seed=9)
    a, ga = generate(spec)
    b, gb = generate(spec)
    assert a == b and ga.to_dict() == gb.to_dict()
    c, _ = generate(SynthSpec(default_archetypes()[:2], consumers_per_archetype=3, days=2, rng_seed=10))
    assert c != a


def test_three_archetypes_recovered():
    archetypes = default_archetypes(0.02)[:3]
    d, gt = generate(SynthSpec(archetypes, consumers_per_archetype=20, days=2))
    m = fit_dataset(d)
    assert m.k == 3
    by_label = {}
    for (c, day), p in d.profiles.items():
        by_label.setdefault(gt.labels[c], set()).add(int(m.predict(normalize(p).weights)[0]))
    assert all(len(v) == 1 for v in by_label.values())
    assert len(set.union(*by_label.values())) == 3


def test_optimal_scheme_scores():
    d, gt = generate(SynthSpec(default_archetypes(), consumers_per_archetype=10, days=2))
    m = fit_dataset(d)
    rep = assess_scheme(d, m, optimal_schemes(gt), prices=gt.prices)
    for day in rep.days:
        assert day.doc.doc == 1.0 and day.dt.dt_percent == 0.0
        assert set(day.ledger.flags()) == {"neutral"}
    with pytest.raises(UnknownDay):
        optimal_scheme(gt, "1999-01-01")


def test_archetype_validation():
    with pytest.raises(ValidationError):
        Archetype("x", np.ones(24), jitter=0.2)
    with pytest.raises(ValidationError):
        Archetype("x", -np.ones(24))


def test_spec_from_dict():
    spec = spec_from_dict({"archetypes": ["flat", {"name": "mine", "base": [1.0] * 24}], "days": 2, "jitter": 0.0})
    assert [a.name for a in spec.archetypes] == ["flat", "mine"] and spec.days == 2
    with pytest.raises(ValidationError):
        spec_from_dict({"archetypes": ["nope"]})
