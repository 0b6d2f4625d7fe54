"""Exception classes shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical/convergence problems exit 3, I/O problems exit 4.
"""


class ConfigError(ValueError):
    """Invalid physical configuration or scenario input."""


class ScenarioError(ConfigError):
    """Scenario file violates the schema (bad key, unit, or section)."""


class NumericError(RuntimeError):
    """Numerical failure: non-convergence, degenerate data, refused extrapolation."""
