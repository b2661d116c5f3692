"""Shared-memory network embedding by sparsified matrix factorization.

Pipeline: downsampled random-walk path sampling builds a sparse estimator of
the trunc-log walk matrix, a power-iterated randomized SVD factorizes it,
and Chebyshev spectral propagation enhances the result.  Evaluation, tuning
and desk-scale oracles live alongside.
"""

from .datasets import (
    LabeledNodes,
    LinkPredSplit,
    erdos_renyi_graph,
    load_labels,
    make_linkpred_split,
    random_connected_graph,
    random_graph_edges,
    save_labels,
    sbm_graph,
    split_train_test,
)
from .errors import CapacityError, FormatError, LightneError, ResourceError
from .evaluation import (
    Metrics,
    classify_and_score,
    dense_netmf_oracle,
    effective_resistance_oracle,
    jacobi_singular_values,
    link_pred_score,
    micro_macro_f1,
    node_classification_eval,
    train_ovr_logreg,
)
from .graph import (
    EdgeList,
    Graph,
    build_graph,
    decode_block,
    encode_block,
    kth_neighbor,
    load_graph,
    map_edges_parallel,
    normalize_edges,
    random_walk,
    read_edge_list,
    save_graph,
)
from .hashtable import SparsifierTable, pack_pair, unpack_pair
from .pipeline import (
    HyperParams,
    RunConfig,
    TaskSpec,
    convert_edge_list,
    embed_graph,
    evaluate_embedding,
    load_run_config,
    run_embed,
    run_eval,
    run_tune,
)
from .propagation import (
    PropagationParams,
    chebyshev_propagate,
    modified_bessel_i,
    normalized_laplacian_apply,
)
from .randsvd import (
    SvdFactors,
    SvdParams,
    eig_svd,
    embedding_from_factors,
    fast_randomized_svd,
    gaussian_test_matrix,
    load_embedding,
    projection_subspace,
    save_embedding,
    save_embedding_text,
)
from .rng import StreamRng
from .sparsifier import (
    SamplingParams,
    assemble_netmf,
    downsample_prob,
    path_sample,
    sample_sparsifier,
)
from .tuner import (
    IntUniform,
    LogUniform,
    SearchSpace,
    Simplex,
    TrialRecord,
    TuneResult,
    Uniform,
    embedding_search_space,
    sample_config,
    tune,
)

__version__ = "0.1.0"
