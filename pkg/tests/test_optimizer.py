import csv
import math

import pytest

from knnlab.analytics import c_bound
from knnlab.errors import DomainError
from knnlab.geometry import l_max
from knnlab.optimizer import (SearchConfig, _assert_unimodal, plateau_table,
                              plateau_upper_endpoint, search, write_grid_csv)


def closed_form_endpoint(L):
    s = math.sin(math.pi / L)
    return 2 * s / (1 - 3 * s)


@pytest.mark.parametrize("L", range(10, 40))
def test_plateau_endpoint_closed_form(L):
    assert plateau_upper_endpoint(L) == pytest.approx(closed_form_endpoint(L), rel=1e-10)


def test_plateau_endpoint_values():
    assert plateau_upper_endpoint(11) == pytest.approx(3.6402, abs=5e-4)
    assert math.isinf(plateau_upper_endpoint(9))
    e = plateau_upper_endpoint(11)
    assert l_max(e * (1 - 1e-9)) == 11
    assert l_max(e * (1 + 1e-6)) == 10


def test_plateau_table_tiles_range():
    table = plateau_table(0.1, 10.0)
    assert table[0][1][0] == 0.1 and table[-1][1][1] == 10.0
    for (_, (_, hi)), (_, (lo, _)) in zip(table, table[1:]):
        assert hi == lo
    for L, (lo, hi) in table:
        mid = 0.5 * (lo + hi)
        assert l_max(mid) == L


def test_default_search():
    res = search(SearchConfig())
    assert res.best_L == 11
    assert 3.55 <= res.best_a <= 3.65
    assert 0.1290 <= res.best_c <= 0.1293
    assert res.best_c >= c_bound(3.6, 11).c
    assert res.grid_best.c <= res.best_c


def test_search_single_point():
    res = search(SearchConfig(1.0, 1.0))
    assert res.best_L == 15 and res.best_c == pytest.approx(0.086292, abs=1e-6)


def test_full_sweep_agrees_with_lmax_only():
    a = search(SearchConfig(a_step=1e-2))
    b = search(SearchConfig(a_step=1e-2, L_policy="full_sweep"))
    assert b.best_c == pytest.approx(a.best_c, rel=1e-12)
    assert b.best_L == a.best_L


def test_step_refinement_stable():
    a = search(SearchConfig(a_step=2e-3))
    b = search(SearchConfig(a_step=1e-3))
    assert abs(a.best_c - b.best_c) <= 1e-6


def test_bad_config():
    with pytest.raises(DomainError):
        SearchConfig(a_min=2, a_max=1)
    with pytest.raises(DomainError):
        SearchConfig(a_step=0)


def test_unimodality_check():
    _assert_unimodal(11, 3.3, 3.64)
    _assert_unimodal(4, 1.0, 3.0)  # peak at a = 2 inside
    _assert_unimodal(4, 2.5, 50.0)  # decreasing only


def test_grid_csv(tmp_path):
    res = search(SearchConfig(3.5, 3.7, 0.05, refine=False))
    path = tmp_path / "grid.csv"
    write_grid_csv(res.grid, path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["a", "L", "l_max", "l_min_upper", "ln_g", "c", "feasible"]
    assert len(rows) == len(res.grid) == 5


def test_full_sweep_single_column_takes_best_L():
    # independent oracle: maximise -1/ln_g over every L in [l_min_upper, l_max] at a = 1
    def c_of(L):
        g = (L + 1) * math.log(L + 1) - L * math.log(4) - 2 * (L + 1) * math.log(3)
        return -1 / g
    best_L = max(range(8, 16), key=c_of)
    res = search(SearchConfig(1.0, 1.0, L_policy="full_sweep"))
    assert (res.best_L, res.best_c) == (best_L, pytest.approx(c_of(best_L), rel=1e-12))
    assert res.best_L == 8 and res.best_c == pytest.approx(0.090168, abs=1e-6)
