"""Distance-preserving transaction digests and the two-phase consensus
protocols built on them: digest arithmetic, bloom push sync, mock aggregate
signatures, a deterministic protocol simulator, and the analytical cost and
latency models the simulations are compared against.
"""

from .analysis import (
    CalibrationResult,
    adversarial_search,
    calibrate,
    collision_probability,
    committee_failure_prob,
    distance_bound,
    empirical_collision_rate,
    expected_sq_distance,
    fast_path_probability,
    liveness_failure_bound,
    monte_carlo_distance_moments,
)
from .bloom import BloomFilter, build_filter, filter_params, missing_from, tx_id
from .costs import (
    LatencyConstants,
    LatencyProjection,
    bls_latency,
    finality_projection,
    hotstuff_messages,
    network_latency,
    pbft_messages,
)
from .crossshard import (
    CoordinationCost,
    ShardPairScenario,
    digest_cost,
    multi_shard_cost,
    receipt_cost,
    simulate_pair,
    twopc_cost,
)
from .digest import (
    Digest,
    GroupSummary,
    add,
    decode_digest,
    decode_summary,
    digest_of,
    distance,
    encode_digest,
    encode_summary,
    merge_summaries,
    subtract,
    summarize,
    tx_vector,
    weighted_mean,
)
from .flat import ReputationTable, RoundResult, RunStats, run_many, run_round
from .signatures import (
    QuorumCertificate,
    SignerBitmap,
    SignerRegistry,
    aggregate,
    keygen,
    quorum,
    sign,
)
from .simnet import Behavior, Metrics, SimConfig, World, prepare_round, spawn_world
from .tree import (
    CommitteeComparison,
    TreeTopology,
    build_topology,
    committee_compare,
    run_tree_many,
    run_tree_round,
)

__version__ = "0.1.0"

__all__ = [
    "Behavior",
    "BloomFilter",
    "CalibrationResult",
    "CommitteeComparison",
    "CoordinationCost",
    "Digest",
    "GroupSummary",
    "LatencyConstants",
    "LatencyProjection",
    "Metrics",
    "QuorumCertificate",
    "ReputationTable",
    "RoundResult",
    "RunStats",
    "ShardPairScenario",
    "SignerBitmap",
    "SignerRegistry",
    "SimConfig",
    "TreeTopology",
    "World",
    "add",
    "adversarial_search",
    "aggregate",
    "bls_latency",
    "build_filter",
    "build_topology",
    "calibrate",
    "collision_probability",
    "committee_compare",
    "committee_failure_prob",
    "decode_digest",
    "decode_summary",
    "digest_cost",
    "digest_of",
    "distance",
    "distance_bound",
    "empirical_collision_rate",
    "encode_digest",
    "encode_summary",
    "expected_sq_distance",
    "fast_path_probability",
    "filter_params",
    "finality_projection",
    "hotstuff_messages",
    "keygen",
    "liveness_failure_bound",
    "merge_summaries",
    "missing_from",
    "monte_carlo_distance_moments",
    "multi_shard_cost",
    "network_latency",
    "pbft_messages",
    "prepare_round",
    "quorum",
    "receipt_cost",
    "run_many",
    "run_round",
    "run_tree_many",
    "run_tree_round",
    "sign",
    "simulate_pair",
    "spawn_world",
    "subtract",
    "summarize",
    "twopc_cost",
    "tx_id",
    "tx_vector",
    "weighted_mean",
]
