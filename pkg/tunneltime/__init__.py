import logging

from flask import Flask

from tunneltime.config import Config
from tunneltime.extensions import pool

__version__ = "0.4.0"


def create_app(overrides=None):
    app = Flask(__name__)
    app.config.from_object(Config)
    if overrides:
        app.config.update(overrides)

    logging.getLogger("tunneltime").setLevel(app.config["LOG_LEVEL"])

    # Initialize extensions
    pool.init_app(app)

    # Register blueprints
    from tunneltime.api import bp as api_bp
    from tunneltime.cli import bp as cli_bp

    app.register_blueprint(api_bp, url_prefix="/api")
    app.register_blueprint(cli_bp)

    return app
