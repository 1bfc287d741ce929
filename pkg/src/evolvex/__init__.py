"""Forecasting the evolution of social-network users.

Library surface: synthetic temporal-network generation, modality encoders,
three fusion strategies with analytic gradients, a dual-head predictor with
four-stage rollout, training, evaluation metrics, prompt-based forecasting,
and a read-only HTTP API for the companion UI.
"""

__version__ = "0.1.0"
