from . import gridpack, pushbox
from .gridpack import (
    GridPackConfig, GridPackState, GridOracle, UnsupportedFamilyError,
    bfs_distance,
)
from .pushbox import PushBoxConfig, PushBoxState
from .episode import (
    EpisodeRecord, EpisodeIOError, reward, reward_sequence, return_to_go,
    normalize_value, snap_value, save_episodes, load_episodes, SCHEMA_VERSION,
)
from .tasks import Task, make_task, TASK_NAMES
