from .bridge import (
    BridgeSession,
    decode_frame,
    encode_frame,
    make_bridge_app,
    map_ui_action,
)
from .collect import (
    ExpertSource,
    InterventionSource,
    NullSource,
    ScriptedSource,
    expert_corpus,
    intervention_fraction,
    make_policy_runner,
    run_rollout,
)
from .stitch import handoff_boundaries, max_seam_delta, stitch_interventions

__all__ = [
    "BridgeSession",
    "ExpertSource",
    "InterventionSource",
    "NullSource",
    "ScriptedSource",
    "decode_frame",
    "encode_frame",
    "expert_corpus",
    "handoff_boundaries",
    "intervention_fraction",
    "make_bridge_app",
    "make_policy_runner",
    "map_ui_action",
    "max_seam_delta",
    "run_rollout",
    "stitch_interventions",
]
