import pytest
from fixtures.fixtures import *
