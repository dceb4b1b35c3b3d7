class SimulationError(RuntimeError):
    """The structural model could not be simulated."""


class EquilibriumError(SimulationError):
    """The feedback equilibrium does not exist or the iteration did not converge."""
