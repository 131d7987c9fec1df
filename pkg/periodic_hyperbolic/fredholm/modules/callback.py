class BaseCallbackHandler:
    """Base callback handler that can be used to handle callbacks from the periodic BVP pipeline."""

    def on_validation_end(self, report, **kwargs):
        """Run when the problem validation finishes."""
        pass

    def on_resonance_check_start(self, **kwargs):
        """Run when the non-resonance criteria evaluation starts."""
        pass

    def on_resonance_check_end(self, report, **kwargs):
        """Run when the non-resonance criteria evaluation finishes."""
        pass

    def on_solve_start(self, strategy: str, **kwargs):
        """Run when a solve strategy starts."""
        pass

    def on_iteration_end(self, iteration: int, residual: float, **kwargs):
        """Run when an outer iteration of an iterative strategy finishes."""
        pass

    def on_solve_end(self, outcome, **kwargs):
        """Run when the solve finishes."""
        pass

    def on_kernel_analysis_end(self, estimate, **kwargs):
        """Run when the kernel analysis finishes."""
        pass
