"""Levy-driven Ornstein-Uhlenbeck dynamics on finite spectral truncations.

Simulation of dual-space-valued Levy processes from their characteristics,
stochastic integration against them, two-parameter evolution systems, the
mild/cadlag solution representations of linear stochastic evolution equations,
and the verification harness for the constructive identities tying them
together.
"""

__version__ = "0.1.0"

from .spaces import (
    DualVector,
    SeminormFamily,
    TestFunction,
    dual_seminorm,
    hs_embedding_norm,
    pairing,
    seminorm,
)
from .levy import (
    LevyCharacteristics,
    LevyPath,
    char_functional,
    empirical_char,
    evaluate,
    ito_components,
    large_jump_mean,
    simulate_path,
)
from .evolution import (
    DiagonalHomogeneous,
    DiagonalTimeDependent,
    EvolutionSystem,
    GeneralMatrix,
    GeneratorFamily,
    Perturbed,
    apply_U,
    apply_U_dual,
)
from .stochint import IntegralPath, IntegrandR
from .ou import SEEProblem, SolutionPath, mild_solution, ou_cadlag, stochastic_convolution

__all__ = [
    "DualVector",
    "SeminormFamily",
    "TestFunction",
    "pairing",
    "seminorm",
    "dual_seminorm",
    "hs_embedding_norm",
    "LevyCharacteristics",
    "LevyPath",
    "simulate_path",
    "evaluate",
    "ito_components",
    "char_functional",
    "empirical_char",
    "large_jump_mean",
    "EvolutionSystem",
    "DiagonalHomogeneous",
    "DiagonalTimeDependent",
    "GeneralMatrix",
    "Perturbed",
    "GeneratorFamily",
    "apply_U",
    "apply_U_dual",
    "IntegrandR",
    "IntegralPath",
    "SEEProblem",
    "SolutionPath",
    "stochastic_convolution",
    "mild_solution",
    "ou_cadlag",
]
