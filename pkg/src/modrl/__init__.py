"""modrl: sparse, spatially regularised RL policies with detectable modules.

Train PPO policies on symbolic grid environments under a distance-weighted
sparsity loss, prune and fine-tune them, detect the emergent functional
modules with an extended Louvain algorithm, and characterise module
function through pre-inference weight interventions.
"""
from .detection import (
    ModularityReport,
    ari,
    detect_modules,
    finetune_partition,
    isolation,
)
from .envs import axis_groups, make_env, obs_dim
from .graphs import (
    WeightedGraph,
    functional_graph,
    internal_louvain,
    louvain,
    modularity_q,
    structural_graph,
)
from .interventions import (
    InterventionSpec,
    apply_intervention,
    compare_interventions,
    run_intervention_eval,
)
from .network import (
    ActivationTrace,
    SpatialMLP,
    collect_trace,
    forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .regularizer import (
    RegConfig,
    connection_cost,
    neuron_distance,
    relocate_neurons,
    schedule_lambda,
    weighted_degree,
)
from .render import RenderStyle, render
from .training import (
    TrainConfig,
    TrainResult,
    compute_gae,
    evaluate,
    ppo_update,
    prune,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationTrace", "InterventionSpec", "ModularityReport", "RegConfig",
    "RenderStyle", "SpatialMLP", "TrainConfig", "TrainResult", "WeightedGraph",
    "apply_intervention", "ari", "axis_groups", "collect_trace",
    "compare_interventions", "compute_gae", "connection_cost",
    "detect_modules", "evaluate", "finetune_partition", "forward",
    "functional_graph", "init_network", "internal_louvain", "isolation",
    "load_checkpoint", "louvain", "make_env", "modularity_q",
    "neuron_distance", "obs_dim", "ppo_update", "prune", "relocate_neurons",
    "render", "run_intervention_eval", "save_checkpoint", "schedule_lambda",
    "structural_graph", "train", "weighted_degree",
]
