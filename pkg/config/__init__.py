from config.settings import RuntimeSettings, get_settings
from config.logging_config import configure_logging

__all__ = ["RuntimeSettings", "get_settings", "configure_logging"]
