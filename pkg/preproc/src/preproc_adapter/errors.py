class AdapterError(Exception):
    """Base class for adapter failures."""


class DecodeError(AdapterError):
    """A media file could not be opened or read."""


class ModelError(AdapterError):
    """A captioning or classification backend failed on one segment."""


class SchemaError(AdapterError):
    """Emitted records violate the collection metadata schema."""
