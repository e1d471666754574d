"""Command-line interface and model-file format."""
from .main import RunManifest, build_parser, main
from .modelfile import ModelFileError, format_model, parse_model_file, parse_model_text, write_model_file

__all__ = ["RunManifest", "build_parser", "main", "ModelFileError", "format_model",
           "parse_model_file", "parse_model_text", "write_model_file"]
