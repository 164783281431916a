"""Guided tabular diffusion for parametric engineering design.

Train a conditional denoising model on design tables, steer sampling toward a
target performance value with classifier and predictor gradients, and
complete partially specified designs through mask-based resampling, with an
evaluation suite (MAPE, PRD, MMD, stability, DOE/ANOVA) to validate results.
"""

from . import designs, diffusion, evalkit, guidance, netcore, repaint, rngs

__all__ = ["designs", "diffusion", "evalkit", "guidance", "netcore", "repaint", "rngs"]

__version__ = "0.1.0"
