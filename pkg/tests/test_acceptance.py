"""Exit-criteria suite: one test per criterion, one printed line each."""

import pytest

from blobflow.acceptance import CRITERIA


@pytest.mark.parametrize("cid", sorted(CRITERIA))
def test_criterion(cid):
    result = CRITERIA[cid]()
    print(result.line(), flush=True)
    assert result.passed, result.line()
