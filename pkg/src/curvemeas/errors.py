"""Exception types shared across the package.

The CLI maps these onto exit codes: input/format problems exit 3,
infeasible optimization problems exit 4.
"""


class CurvemeasError(Exception):
    """Base class for package-specific errors."""


class InputFormatError(CurvemeasError):
    """A file or inline specification could not be parsed or validated."""


class InfeasibleError(CurvemeasError):
    """An optimization subproblem has no feasible point (e.g. mass deficit)."""


class DegenerateRadiusError(CurvemeasError):
    """A sphere query hit a vertex or tangency within tolerance; perturb the radius."""
