class ModelError(Exception):
    """Base class for failures that belong to a single (date, model) forecast
    and must not abort a study."""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.message = message
