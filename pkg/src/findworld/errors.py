"""Exception hierarchy.

Every error carries an ``exit_code`` so the CLI can map failures onto the
documented process status (2 config, 3 data, 4 numeric).
"""


class FindWorldError(Exception):
    exit_code = 1

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ConfigError(FindWorldError):
    exit_code = 2

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        if self.field is not None:
            d["field"] = self.field
        return d


class DataError(FindWorldError):
    exit_code = 3


class NumericError(FindWorldError):
    exit_code = 4


# graph / spec problems are configuration errors
class CycleError(ConfigError):
    def __init__(self, back_edge):
        self.back_edge = tuple(back_edge)
        super().__init__(f"cycle detected via edge {back_edge[0]} -> {back_edge[1]}")


class UnknownParentError(ConfigError):
    def __init__(self, node, parent):
        super().__init__(f"node {node!r} references undeclared parent {parent!r}")


class InvalidParamError(NumericError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.row = row
        self.column = column

    def to_dict(self):
        d = super().to_dict()
        d.update(row=self.row, column=self.column)
        return d


class SchemaMismatch(DataError):
    pass


class TooFewRows(DataError):
    pass


class UnmappedCategory(DataError):
    def __init__(self, column, values):
        self.column = column
        self.values = sorted(map(str, values))
        super().__init__(f"unmapped categories in {column!r}: {self.values}")


class EmptyGroup(DataError):
    pass


class DegenerateGroup(DataError):
    pass


class DegenerateTarget(DataError):
    pass


class SingleClass(DataError):
    pass


class UndefinedRate(DataError):
    pass


class GridExhausted(NumericError):
    def __init__(self, best_lambda, best_disparity):
        self.best_lambda = best_lambda
        self.best_disparity = best_disparity
        super().__init__(
            f"no grid value reached the disparity bound; best was "
            f"lambda={best_lambda:g} with C={best_disparity:.4f}"
        )


class TooFewPoints(DataError):
    pass
