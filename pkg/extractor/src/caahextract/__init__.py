"""caahextract: raw media -> CAAH embedding datasets for conflictfusion."""

from .encoders import BackendError, PretrainedEncoders, StubEncoders, get_encoders
from .extract import ExtractionReport, SampleReport, extract
from .formats import FormatError, write_tokens
from .media import DecodeError, load_audio, load_video_frames, preprocess_window
from .spec import ExtractionSpec, InputItem, SpecError, read_input_manifest

__all__ = [
    "BackendError",
    "DecodeError",
    "ExtractionReport",
    "ExtractionSpec",
    "FormatError",
    "InputItem",
    "PretrainedEncoders",
    "SampleReport",
    "SpecError",
    "StubEncoders",
    "extract",
    "get_encoders",
    "load_audio",
    "load_video_frames",
    "preprocess_window",
    "read_input_manifest",
    "write_tokens",
]
