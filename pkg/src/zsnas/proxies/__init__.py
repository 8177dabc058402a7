from .config import Batch, ProxyConfig, ProxyError, ProxyScore, Sentinel, fingerprint, frozen, make_batch
from .evaluate import PROXIES, ProxyInfo, build_network, evaluate_all, rank_value, score_one, structural_proxy
from .gradient import (
    fisher,
    fisher_from_activations,
    gradient_pass,
    grad_norm,
    gradsign,
    gradsign_from_grads,
    grasp,
    grasp_from_closure,
    per_sample_gradients,
    snip,
    synflow,
)
from .regions import (
    activation_codes,
    hamming_kernel,
    logdet_from_codes,
    logdet_score,
    num_linear_regions,
    pattern_match_matrix,
    regions_from_codes,
)
from .spectral import (
    condition_from_gram,
    input_jacobian,
    jacob_cov,
    jacob_cov_from_jacobian,
    jacobian_correlation,
    ntk_cond,
    ntk_gram,
    zen_from_extractor,
    zen_score,
)
