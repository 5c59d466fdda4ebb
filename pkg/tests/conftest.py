import pytest

from laminar.registry import Registry
from laminar.server import App, serve_in_thread
from laminar.showcase import default_catalog


@pytest.fixture
def registry():
    return Registry(pbkdf2_iterations=1000)


@pytest.fixture
def catalog():
    return default_catalog()


@pytest.fixture
def app(registry):
    return App(registry)


@pytest.fixture
def auth(app):
    """Register and log in ``zz46``; returns the Authorization header."""
    app.dispatch("POST", "/auth/register", body={"user_name": "zz46", "user_password": "password"})
    _, doc = app.dispatch("POST", "/auth/login", body={"user_name": "zz46", "user_password": "password"})
    return {"Authorization": f"Bearer {doc['token']}"}


@pytest.fixture
def live_server(app):
    server, thread = serve_in_thread(app)
    host, port = server.server_address[:2]
    yield f"http://{host}:{port}"
    server.shutdown()
    server.server_close()
