class AdapterError(Exception):
    """Anything that should abort the run with a message and no output."""
