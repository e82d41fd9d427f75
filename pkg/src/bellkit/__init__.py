"""Bell/CHSH inequalities on finite probability spaces, joint-extension
feasibility, singlet geometry and a chameleon-effect Monte Carlo engine."""

__version__ = "0.1.0"

from bellkit.kernel import (
    BoundReport,
    DecoupledReport,
    bell_signed_sum,
    bell_three_sum,
    chsh_four_sample,
    chsh_value,
    three_term_bound,
    two_term_bound,
)

__all__ = [
    "__version__",
    "BoundReport",
    "DecoupledReport",
    "bell_signed_sum",
    "bell_three_sum",
    "chsh_four_sample",
    "chsh_value",
    "three_term_bound",
    "two_term_bound",
]
