# Model module
from .diffattn import (AttentionTrace, DiffAttnParams, DiffAttnV1Params, diffattn, diffattn_v1,
                       diffattn_v2, lambda_gate)
from .embedding import (EmbeddingTables, embed_codes_pooled, encode_demographics, encode_labs,
                        homograph_refine)
from .graph_prior import (InterVisitBias, assemble_inter_bias, build_kv_layout, ddi_pair_count,
                          visit_pair_ddi_density)
from .gru import GruParams, gru_sequence, gru_step
from .graphdiffmed import (GraphDiffMed, ModalityConfig, ModelHyper, ModelState, VisitOutput, VisitVectors,
                           aggregate_patient, build_query_kv, causal_review, inter_visit_attention,
                           intra_visit_attention, model_forward, predict_logits)
from .checkpoint import load_checkpoint, save_checkpoint
