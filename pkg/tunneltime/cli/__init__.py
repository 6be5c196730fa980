from flask import Blueprint

bp = Blueprint("cli", __name__, cli_group=None)

from tunneltime.cli import commands  # noqa: F401
