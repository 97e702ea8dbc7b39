"""Data-curation stages and pipeline."""

from .convert import NEGATION_MARKERS, convert_choice_to_open, has_negation, is_option_letter
from .cot import SECTIONS, CotCheck, validate_structured_cot
from .minhash import (ShingleSignature, estimated_jaccard, exact_jaccard, minhash_signature,
                      shingles)
from .pipeline import STAGES, PipelineOptions, UnknownStage, run_pipeline, stage_dedup
from .records import Decision, PipelineRecord, read_jsonl, write_jsonl
from .stages import (stage_answer_reference_match, stage_hyperlink_filter, stage_hyperlink_strip,
                     stage_media_filter, stage_rl_quality_gate, stage_short_entry,
                     stage_subquestion_filter)

__all__ = [
    "NEGATION_MARKERS", "SECTIONS", "STAGES", "CotCheck", "Decision", "PipelineOptions", "PipelineRecord",
    "ShingleSignature", "UnknownStage", "convert_choice_to_open", "estimated_jaccard", "exact_jaccard",
    "has_negation", "is_option_letter", "minhash_signature", "read_jsonl", "run_pipeline",
    "shingles", "stage_answer_reference_match", "stage_dedup", "stage_hyperlink_filter",
    "stage_hyperlink_strip", "stage_media_filter", "stage_rl_quality_gate", "stage_short_entry",
    "stage_subquestion_filter", "validate_structured_cot", "write_jsonl",
]
