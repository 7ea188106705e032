"""Pool specifications, presets, LLN quantities, name allocation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from tailrisk.pool import PoolSpec, TypeSpec, allocate_names, lln, max_loss, preset
from tailrisk.recovery import BetaFamily, MeanMap, PointMass


def test_presets_reproduce_common_lln_pair():
    for case in range(1, 7):
        summary = lln(preset(case))
        assert summary.d_bar == pytest.approx(0.08, abs=1e-10), f"case {case}"
        assert summary.l_bar == pytest.approx(0.064, abs=1e-10), f"case {case}"


def test_preset_structure():
    one = preset(1)
    assert len(one.types) == 1
    assert one.types[0].recovery == PointMass(0.2)
    four = preset(4)
    assert [t.weight for t in four.types] == pytest.approx([1 / 3, 2 / 3])
    assert isinstance(four.types[0].recovery, BetaFamily)
    assert four.types[0].recovery.mean_map.kind == "affine"
    assert four.types[1].recovery.mean_map.kind == "quadratic"
    six = preset(6)
    assert six.types[0].recovery.loss_exponent(0.77) == pytest.approx(9.0)
    assert six.types[1].recovery.loss_exponent(0.12) == pytest.approx(3.0)


def test_preset_rejects_unknown_case():
    with pytest.raises(ValueError):
        preset(0)
    with pytest.raises(ValueError):
        preset(7)


def test_lln_zero_default_pool():
    spec = PoolSpec((TypeSpec(1.0, 0.0, PointMass(0.5)),))
    summary = lln(spec)
    assert summary == (0.0, 0.0)


def test_lln_constant_recovery_closed_form():
    # D-independent recoveries: l_bar = sum w p (1 - m) with no feedback term.
    summary = lln(preset(6))
    expected = (1 / 3) * 0.08 * 0.9 + (2 / 3) * 0.08 * 0.75
    assert summary.l_bar == pytest.approx(expected, abs=1e-15)


def test_lln_invariant_under_reordering_and_splitting():
    spec = preset(5)
    reordered = PoolSpec(tuple(reversed(spec.types)))
    assert lln(reordered) == pytest.approx(tuple(lln(spec)), abs=1e-14)
    t0 = spec.types[0]
    split = PoolSpec(
        (
            TypeSpec(t0.weight / 2, t0.default_prob, t0.recovery),
            TypeSpec(t0.weight / 2, t0.default_prob, t0.recovery),
            spec.types[1],
        )
    )
    assert lln(split) == pytest.approx(tuple(lln(spec)), abs=1e-14)


def test_weight_validation():
    with pytest.raises(ValueError):
        TypeSpec(0.0, 0.1, PointMass(0.2))
    with pytest.raises(ValueError):
        TypeSpec(0.5, 1.2, PointMass(0.2))
    with pytest.raises(ValueError):
        PoolSpec((TypeSpec(0.6, 0.1, PointMass(0.2)), TypeSpec(0.3, 0.1, PointMass(0.2))))
    with pytest.raises(ValueError):
        PoolSpec(())


def test_weights_renormalize_to_machine_one():
    w = 0.2 + 1e-13
    spec = PoolSpec((TypeSpec(w, 0.1, PointMass(0.2)), TypeSpec(0.8, 0.1, PointMass(0.3))))
    assert math.fsum(t.weight for t in spec.types) == 1.0
    # construction is idempotent: re-wrapping the stored types changes nothing
    again = PoolSpec(spec.types)
    assert again == spec


def test_allocate_names_largest_remainder():
    spec = preset(4)  # weights (1/3, 2/3)
    assert allocate_names(spec, 10).tolist() == [3, 7]
    assert allocate_names(spec, 1).tolist() == [0, 1]
    assert allocate_names(spec, 3).tolist() == [1, 2]
    for n in (1, 7, 100, 9999):
        counts = allocate_names(spec, n)
        assert counts.sum() == n
        assert np.all(np.abs(counts - n * spec.weights) < 1.0)


def test_allocate_names_tie_break_is_deterministic():
    spec = PoolSpec((TypeSpec(0.5, 0.1, PointMass(0.2)), TypeSpec(0.5, 0.1, PointMass(0.3))))
    first = allocate_names(spec, 3)
    assert first.sum() == 3
    for _ in range(5):
        assert allocate_names(spec, 3).tolist() == first.tolist()


def test_max_loss():
    assert max_loss(preset(1)) == pytest.approx(0.8, abs=1e-15)
    assert max_loss(preset(2)) == pytest.approx(1.0, abs=1e-15)
    mixed = PoolSpec(
        (
            TypeSpec(0.5, 0.1, PointMass(0.4)),
            TypeSpec(0.5, 0.1, BetaFamily(MeanMap.constant(0.25))),
        )
    )
    assert max_loss(mixed) == pytest.approx(0.5 * 0.6 + 0.5 * 1.0, abs=1e-15)
