from .context import GThetaResult, PositivityError, TContext, bracket, g_from_theta, random_context
from .forms import AlternatingForm, OneOneForm, haar_unitary, wedge_vectors
from .norms import (
    HoldoutResult,
    NormComparison,
    ProbeResult,
    comparison_constants,
    context_ratio,
    norm_comparison_check,
    probe_holdout,
    ratio_extremes,
    uniform_comparison_probe,
    usual_gram,
    usual_norm_sq,
)
