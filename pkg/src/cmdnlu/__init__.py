"""Turn spoken-style robot instructions into (action, slots) frames."""

from .corpus import OTHER, load_schema, tokenize
from .errors import (CmdNluError, ConfigurationError, ParseError, SchemaError, TrainingError,
                     ValidationError)
from .pipeline import CommandFrame, Pipeline, PipelineConfig, evaluate, understand

__version__ = "0.1.0"
