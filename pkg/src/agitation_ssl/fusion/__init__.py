from .bcc import (default_prior, e_step, e_step_log, expected_log_confusion, free_energy, m_step_confusion,
                  posterior_mean_confusion, run_bcc)
from .bccnet import FusionConfig, FusionState, build_combiner, fusion_from_state, m_step_network, train_bccnet
