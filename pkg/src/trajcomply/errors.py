"""Exception types shared across the toolkit."""


class TrajComplyError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TrajComplyError):
    """A file could not be decoded or parsed at all."""


class ValidationError(TrajComplyError):
    """A parsed object violates an invariant.

    ``path`` locates the offending field, e.g. ``"drivable_area: polygons[0]"``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class UnknownSceneId(TrajComplyError):
    """A predictions file references scene ids that are not in the corpus."""

    def __init__(self, ids):
        self.ids = sorted(ids)
        super().__init__(f"unknown scene ids: {', '.join(self.ids)}")


class LengthMismatch(TrajComplyError):
    """Prediction and ground-truth horizons disagree."""


class EmptyCorpus(TrajComplyError):
    """An aggregate was requested over zero scenes."""


class EmptyCenterlines(TrajComplyError):
    """Direction consistency needs at least one centerline point."""


class DegenerateHeading(TrajComplyError):
    """The ego history is stationary, so no heading can be derived."""


class NonFiniteLoss(TrajComplyError):
    """A loss component produced a non-finite value during refinement."""

    def __init__(self, component: str, value: float, iteration: int):
        self.component = component
        self.value = value
        self.iteration = iteration
        super().__init__(
            f"non-finite loss in component '{component}' at iteration {iteration}: {value!r}"
        )
