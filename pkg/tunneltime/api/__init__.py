from flask import Blueprint

bp = Blueprint("api", __name__)

from tunneltime.api import routes  # noqa: F401
