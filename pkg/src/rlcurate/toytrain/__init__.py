"""Desk-scale end-to-end harness for the RL loop."""

from .bank import ToyQuestion, ToyQuestionBank, generate_bank
from .loop import Trainer, attach_advantages, read_checkpoint, train
from .policy import ToyPolicy, render, rollout
from .scripted import ScriptedEnv, saturated_env, scripted_group, waste_reduction, waste_run
from .value import ValueEstimator

__all__ = ["ToyQuestion", "ToyQuestionBank", "generate_bank", "Trainer", "attach_advantages",
           "read_checkpoint", "train", "ToyPolicy", "render", "rollout", "ScriptedEnv", "saturated_env",
           "scripted_group", "waste_reduction", "waste_run", "ValueEstimator"]
