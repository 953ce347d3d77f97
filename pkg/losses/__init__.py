"""Cross-entropy, generalized CE, logit-corrected CE and reweighted CE."""

from losses.objectives import (
    PRIOR_FLOOR,
    CorrectionRow,
    GceConfig,
    ce_loss,
    ce_loss_batch,
    fisher_weights,
    gce_loss,
    gce_loss_batch,
    lc_loss,
    lc_loss_batch,
    lc_pairwise_loss,
    reweighted_ce_loss,
    reweighted_ce_loss_batch,
)

__all__ = [
    'PRIOR_FLOOR',
    'CorrectionRow',
    'GceConfig',
    'ce_loss',
    'ce_loss_batch',
    'fisher_weights',
    'gce_loss',
    'gce_loss_batch',
    'lc_loss',
    'lc_loss_batch',
    'lc_pairwise_loss',
    'reweighted_ce_loss',
    'reweighted_ce_loss_batch',
]
