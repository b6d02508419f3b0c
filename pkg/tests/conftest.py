from __future__ import annotations

import pytest

from langcoder.core import TaskSpec
from langcoder.templates import TemplateLibrary

from support import make_task


@pytest.fixture(scope="session")
def templates() -> TemplateLibrary:
    return TemplateLibrary.load()


@pytest.fixture()
def task() -> TaskSpec:
    return make_task()
