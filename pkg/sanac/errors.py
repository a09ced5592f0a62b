from __future__ import annotations


class SanacError(Exception):
    pass


class ConfigError(SanacError):
    pass


class ShapeError(SanacError):
    pass


class TrainingError(SanacError):
    pass


class EmptySplitError(TrainingError):
    pass


class NonFiniteLossError(TrainingError):
    pass
