# -*- coding: utf-8 -*-

import logging
import logging.config
from threading import Lock

from app import constants
from app.config import Config

'''
This module defines the NormadApp class, a singleton holding the configured
application logger
'''


class NormadApp:
    _app = None
    _lock = Lock()

    def __init__(self):
        raise RuntimeError('call NormadApp.app()')

    @classmethod
    def app(cls):
        if cls._app is None:
            with cls._lock:
                if cls._app is None:
                    instance = object.__new__(cls)
                    instance.config = Config()
                    logging.config.dictConfig(instance.config.LOGGING_CONFIG)
                    instance.logger = logging.getLogger(constants.APP_NAME)
                    instance.logger.debug("Application logging configured")
                    cls._app = instance
        return cls._app

    @classmethod
    def set_log_level(cls, level: str) -> None:
        """
        Change the level of the root logger after configuration, e.g. when the
        CLI receives `--log-level`.

        Args:
            level (str): A standard logging level name.
        """
        cls.app()
        logging.getLogger().setLevel(level.upper())
