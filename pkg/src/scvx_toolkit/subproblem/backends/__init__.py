from scvx_toolkit.subproblem.backends.cvxpy_backend import CvxpyBackend

__all__: tuple[str, ...] = ("CvxpyBackend",)
