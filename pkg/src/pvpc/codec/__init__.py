"""Block-hybrid frame codec, entropy coding and occupancy coding."""

from .entropy import BitReader, BitWriter
from .occupancy import code_occupancy, decode_occupancy
from .transform import dequantize, forward_transform, inverse_transform, quantize
from .unit import CodecConfig, EncodedUnit, UnitSpec, decode_unit, encode_unit, predict_block

__all__ = [
    "BitReader", "BitWriter", "CodecConfig", "EncodedUnit", "UnitSpec", "code_occupancy",
    "decode_occupancy", "decode_unit", "dequantize", "encode_unit", "forward_transform",
    "inverse_transform", "predict_block", "quantize",
]
