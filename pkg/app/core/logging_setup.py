"""
Logging setup shared by the API and the CLI.
"""
import logging
import sys


LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(debug: bool = False, stream=sys.stdout) -> None:
    """
    Configure root logging once per process.

    Args:
        debug: Enable DEBUG level (solver node lines become visible)
        stream: Output stream; the CLI passes stderr so CSV/stdout stay clean
    """
    logging.basicConfig(
        stream=stream,
        level=logging.DEBUG if debug else logging.INFO,
        format=LOG_FORMAT,
        force=True,
    )
