import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

# la base en memoria debe fijarse antes de importar la aplicación
os.environ['DATABASE_URL'] = 'sqlite://'
os.environ.setdefault('COSIM_ARCHIVE_RUNS', '1')

import pytest  # noqa: E402

from scenario import builtin_baseline, builtin_volatile  # noqa: E402

ROOT = _ROOT


@pytest.fixture(scope='session')
def app():
    from app import app as flask_app

    flask_app.config.update(TESTING=True)
    with flask_app.app_context():
        yield flask_app


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def baseline():
    return builtin_baseline()


@pytest.fixture
def volatile():
    return builtin_volatile()
