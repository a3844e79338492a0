from .app import create_app
from .config import ServerConfig, load_config

__all__ = ["create_app", "ServerConfig", "load_config"]
