from .core import (
    HEADER_BYTES,
    CodecConfig,
    CodecStats,
    CompressedBlock,
    Mode,
    Predictor,
    compress_plane,
    compression_ratio,
    decompress_plane,
    effective_bound,
    encode_plane,
)

__all__ = [
    "HEADER_BYTES",
    "CodecConfig",
    "CodecStats",
    "CompressedBlock",
    "Mode",
    "Predictor",
    "compress_plane",
    "compression_ratio",
    "decompress_plane",
    "effective_bound",
    "encode_plane",
]
