class GeoflowError(Exception):
    pass


class GeometryError(GeoflowError):
    pass


class DegenerateCurveError(GeometryError):
    pass


class ProbeExpiredError(GeoflowError):
    pass


class ResidualUndefinedError(GeoflowError):
    pass


class DecayFitError(GeoflowError):
    pass


class FlowBlowupError(GeoflowError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ScenarioError(GeoflowError):
    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field


class OutputError(GeoflowError):
    pass
