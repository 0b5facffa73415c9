"""Dirichlet evidential classification: losses, uncertainty, training, OOD metrics."""

from ._viedl import (
    ConfigError,
    Model,
    NumericalError,
    auroc,
    certify_gradient_bound,
    digamma,
    edl_baseline_loss,
    effective_kl,
    effective_kl_grad,
    evidence_capacity,
    expected_mse,
    fpr_at_95_tpr,
    gaussian_blobs,
    head_evidence,
    kl_divergence,
    lgamma,
    lipschitz_constant,
    ood_blob,
    softplus,
    synthetic,
    trigamma,
    uncertainty,
    vi_loss,
    vi_loss_grad,
)

__all__ = [
    "ConfigError",
    "Model",
    "NumericalError",
    "auroc",
    "certify_gradient_bound",
    "config_text",
    "digamma",
    "edl_baseline_loss",
    "effective_kl",
    "effective_kl_grad",
    "evidence_capacity",
    "expected_mse",
    "fit",
    "fpr_at_95_tpr",
    "gaussian_blobs",
    "head_evidence",
    "kl_divergence",
    "lgamma",
    "lipschitz_constant",
    "ood_blob",
    "softplus",
    "synthetic",
    "trigamma",
    "uncertainty",
    "vi_loss",
    "vi_loss_grad",
]

_DEFAULTS = {
    "epochs": 30,
    "batch_size": 64,
    "learning_rate": 1e-3,
    "seed": 7,
    "optimizer": "adam",
    "beta": 0.1,
    "warmup_epochs": 20,
    "prior": "uniform",
}


def config_text(**overrides) -> str:
    """Renders training options as the key=value config format.

    List values (prior, hidden) are joined with commas.
    """
    cfg = {**_DEFAULTS, **overrides}
    lines = []
    for key, value in cfg.items():
        if isinstance(value, (list, tuple)):
            value = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key}={value}")
    return "\n".join(lines) + "\n"


def fit(features, labels, **options) -> Model:
    """Trains a model; keyword options override the training defaults."""
    return Model.fit(features, labels, config_text(**options))
