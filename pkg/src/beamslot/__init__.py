"""Joint mmWave beam tracking and TDD slot allocation: simulator, PPO scheduler, baselines."""
from .baselines import RandomPolicy, TdmaPolicy, TdmaSchedule, random_policy, tdma_action
from .env import BeamSlotEnv, EnvConfig, Op, SlotAction, SlotOutcome, episode_metrics
from .harness import RunConfig, ecdf, evaluate, summarize
from .ppo import PpoAgent, PpoConfig, train

__version__ = "0.1.0"
