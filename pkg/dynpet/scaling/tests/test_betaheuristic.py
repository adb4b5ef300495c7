import warnings

import pytest
import numpy as np

from dynpet.scaling import BetaTable, read_beta_table, beta_heuristic


def test_beta_table():
    table = BetaTable([1., 3.], [2., 4.])
    assert table(2.) == 3.
    assert table(1.) == 2.
    with pytest.warns(UserWarning):
        assert table(10.) == 4.
    with pytest.warns(UserWarning):
        assert table(0.) == 2.

    assert BetaTable.constant(5.)(123.) == 5.

    with pytest.raises(ValueError):
        BetaTable([1., 1.], [1., 2.])
    with pytest.raises(ValueError):
        BetaTable([1., 2.], [1., -2.])
    with pytest.raises(ValueError):
        BetaTable([1., 2.], [1.])


def test_read_beta_table(tmp_path):
    table = BetaTable([0.5, 1., 4.], [1., 2., 0.5])
    table.to_csv(tmp_path / 'beta.csv')
    loaded = read_beta_table(tmp_path / 'beta.csv')
    assert np.array_equal(loaded.arguments, table.arguments)
    assert np.array_equal(loaded.values, table.values)

    # rows in any order
    (tmp_path / 'shuffled.csv').write_text('argument,value\n4,0.5\n0.5,1\n1,2\n')
    assert np.array_equal(read_beta_table(tmp_path / 'shuffled.csv').arguments, [0.5, 1., 4.])

    (tmp_path / 'bad.csv').write_text('x,y\n1,2\n')
    with pytest.raises(ValueError):
        read_beta_table(tmp_path / 'bad.csv')


def test_beta_heuristic():
    with warnings.catch_warnings():
        warnings.simplefilter('error')
        assert beta_heuristic(1., 1., 1., 1.) == 1.
        # the 1 / v^2 factor
        assert np.isclose(beta_heuristic(2., 1., 1., 1.), 0.25)

    # argument v T_half / (l mass) = 2 between the knots 1 and 3
    table = BetaTable([1., 3.], [2., 6.])
    beta = beta_heuristic(1., 1., 0.5, 1., table=table)
    assert np.isclose(beta, 4.)
    beta = beta_heuristic(2., 2., 0.5, 0.5, table=table)
    assert np.isclose(beta, table(1.) / (0.5 * 4.))

    with pytest.raises(ValueError):
        beta_heuristic(0., 1., 1., 1.)
    with pytest.raises(ValueError):
        beta_heuristic(1., 1., -1., 1.)


if __name__ == '__main__':
    test_beta_table()
    test_beta_heuristic()
