from .server import PROTOCOL_VERSION, StubModel, TabPFNModel, serve

__version__ = "0.1.0"
__all__ = ["PROTOCOL_VERSION", "StubModel", "TabPFNModel", "serve"]
