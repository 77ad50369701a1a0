"""Key-space accounting and key derivation.

The exact pair count for the default layout is a closed-form sum:
with n = 1001 lattice offsets and the beat window spanning steps
2..1000, the ordered pairs number 2 * sum_{k=2}^{1000} (1001 - k)
= 999000.  The continuous-area shortcut gives (2*500 - 2)^2 = 996004.
Both values and their logs are pinned below.
"""

import math

import numpy as np
import pytest

from climex import (
    BudgetInputs,
    KeyRangeError,
    budget,
    count_valid_pairs,
    count_valid_pairs_formula,
    derive_key,
    valid_pair_area,
)

TINY = BudgetInputs(f0_hz=1.0e6, ppm=6.0, f_step_hz=1.0,
                    f_d_min_hz=1.0, f_d_max_hz=6.0)


def test_tiny_grid_counts():
    # 7 offsets, beat window 1..6 steps: 2 * (6+5+4+3+2+1) = 42
    assert TINY.n_freq == 7
    assert count_valid_pairs(TINY) == 42
    assert count_valid_pairs_formula(TINY) == 42


def test_formula_matches_enumeration_on_random_layouts():
    rng = np.random.default_rng(21)
    for _ in range(50):
        half = int(rng.integers(2, 60))
        fd_min = int(rng.integers(1, half + 1))
        fd_max = int(rng.integers(fd_min, 2 * half + 5))
        inp = BudgetInputs(f0_hz=1.0e6, ppm=2.0 * half, f_step_hz=1.0,
                           f_d_min_hz=float(fd_min), f_d_max_hz=float(fd_max))
        assert count_valid_pairs(inp) == count_valid_pairs_formula(inp)


def test_default_pair_count_and_area():
    inp = BudgetInputs()
    assert inp.n_freq == 1001
    assert count_valid_pairs(inp) == 999000
    assert count_valid_pairs_formula(inp) == 999000
    assert valid_pair_area(inp) == 998.0 ** 2


def test_enumeration_guards_against_huge_lattices():
    big = BudgetInputs(ppm=200.0)
    with pytest.raises(ValueError):
        count_valid_pairs(big)
    # the closed form has no such limit
    assert count_valid_pairs_formula(big) > 0


def test_default_budget_values():
    b = budget()
    assert b.n_freq == 1001
    assert b.pair_count == 999000
    assert b.pair_area == 998.0 ** 2
    assert b.log2_pairs == pytest.approx(19.9301, abs=1e-3)
    assert b.log2_pairs_area == pytest.approx(19.9258, abs=1e-3)
    assert b.log2_phi == pytest.approx(5.9734, abs=1e-3)
    assert b.log2_rho == pytest.approx(12.2877, abs=1e-3)
    assert b.bits_f == 19
    assert b.bits_phi == 5
    assert b.bits_rho == 12
    assert b.bits_total_floor == 36
    assert b.bits_total_rounded == 38
    assert b.log2_total == pytest.approx(38.1912, abs=5e-3)
    assert b.log2_total_area == pytest.approx(38.1869, abs=5e-3)
    assert b.n_rho_states == 5000


def test_budget_rejects_empty_pair_set():
    inp = BudgetInputs(f_d_min_hz=1500.0, f_d_max_hz=2000.0)
    assert count_valid_pairs_formula(inp) == 0
    with pytest.raises(ValueError):
        budget(inp)


def test_inputs_validation():
    with pytest.raises(ValueError):
        BudgetInputs(f_step_hz=0.0)
    with pytest.raises(ValueError):
        BudgetInputs(f_d_min_hz=5.0, f_d_max_hz=2.0)
    with pytest.raises(ValueError):
        BudgetInputs(f_d_min_hz=0.0)


# ----------------------------------------------------------------------
# key derivation
# ----------------------------------------------------------------------


def test_key_length_matches_budget():
    k = derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.23, 50.0, BudgetInputs())
    assert len(k) == 36
    assert set(k) <= {"0", "1"}


def test_tiny_grid_hand_key():
    # first valid ordered pair (rank 0), phi bin 2, rho bin 50
    k = derive_key(1.0e6 - 3.0, 1.0e6 - 2.0, 0.25, 1.0, TINY)
    assert k == "00000" + "00010" + "000000110010"


def test_key_is_bin_invariant():
    inp = BudgetInputs()
    base = derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.23, 50.0, inp)
    moved = derive_key(1.0e8 + 313.4, 1.0e8 - 186.7, 1.2999, 50.013, inp)
    assert moved == base
    # crossing a bin boundary changes the key
    other = derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.35, 50.0, inp)
    assert other != base


def test_neighbouring_pairs_get_distinct_prefixes():
    k1 = derive_key(1.0e6 - 3.0, 1.0e6 - 2.0, 0.25, 1.0, TINY)
    k2 = derive_key(1.0e6 - 3.0, 1.0e6 - 1.0, 0.25, 1.0, TINY)
    assert k1[:5] != k2[:5]
    assert k1[5:] == k2[5:]


def test_key_range_errors():
    inp = BudgetInputs()
    with pytest.raises(KeyRangeError):
        derive_key(1.0e8 + 600.0, 1.0e8 - 187.0, 1.0, 50.0, inp)
    with pytest.raises(KeyRangeError):
        derive_key(1.0e8 + 313.0, 1.0e8 + 313.0, 1.0, 50.0, inp)
    with pytest.raises(KeyRangeError):
        derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.0, -1.0, inp)
    with pytest.raises(KeyRangeError):
        derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.0, 200.0, inp)
    narrow = BudgetInputs(f_d_max_hz=100.0)
    with pytest.raises(KeyRangeError):
        derive_key(1.0e8 + 313.0, 1.0e8 - 187.0, 1.0, 50.0, narrow)


def test_total_log_is_consistent():
    b = budget()
    assert b.log2_total == pytest.approx(
        math.log2(b.pair_count) + b.log2_phi + b.log2_rho, abs=1e-9)
