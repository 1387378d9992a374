"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration (CLI exit code 2)."""


class DegenerateNeighborhoodError(RuntimeError):
    """Shape tensor of a point is singular and cannot be inverted.

    Carries the offending point ids in ``point_ids``.
    """

    def __init__(self, point_ids):
        self.point_ids = list(point_ids)
        head = ", ".join(str(p) for p in self.point_ids[:8])
        more = "" if len(self.point_ids) <= 8 else f" (+{len(self.point_ids) - 8} more)"
        super().__init__(f"singular shape tensor at point(s) {head}{more}")


class NumericalBreakdownError(RuntimeError):
    """Non-finite state detected during time stepping (CLI exit code 3)."""

    def __init__(self, step, detail=""):
        self.step = step
        super().__init__(f"numerical breakdown at step {step}: {detail}")
