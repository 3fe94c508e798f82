"""Error types shared across the package."""


class DegenerateDatasetError(ValueError):
    """Dataset cannot supply the requested number of distinct points."""


class GraphDisconnectedError(RuntimeError):
    """k-NN graph is not connected. Carries per-vertex component labels."""

    def __init__(self, component_labels):
        self.component_labels = component_labels
        n_comp = int(max(component_labels)) + 1 if len(component_labels) else 0
        super().__init__(
            f"graph has {n_comp} connected components; increase k to connect it"
        )


class DivergenceError(RuntimeError):
    """Primal-dual iteration diverged; retry with a smaller step size h0."""


class InfeasibleBudgetError(ValueError):
    """No labeling can satisfy the loss budget (it lies below the unconstrained minimum)."""


class IdxFormatError(ValueError):
    """Malformed IDX file. Carries the byte offset where parsing failed."""

    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class OracleUncertifiedError(RuntimeError):
    """Brute-force oracle could not certify its own answer; the test must not pass silently."""
