"""Masked in-network aggregation for smart-meter trees."""

from ._core import (
    FIELD_COUNT,
    CodecConfig,
    ConsumptionVector,
    Paillier,
    ProtocolError,
    __version__,
    collusion_probe,
    encode,
    pack,
    plan_reduction,
    run_round,
    unpack,
    vec_add,
)

__all__ = [
    "FIELD_COUNT",
    "CodecConfig",
    "ConsumptionVector",
    "Paillier",
    "ProtocolError",
    "__version__",
    "collusion_probe",
    "encode",
    "pack",
    "plan_reduction",
    "run_round",
    "unpack",
    "vec_add",
]
