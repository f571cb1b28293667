"""Hex encoding of bit-vectors: little-endian bit order, bit i = element of rank i."""

from __future__ import annotations

from .errors import MalformedInput


def encode(mask: int, width: int) -> str:
    nbytes = (width + 7) // 8
    return mask.to_bytes(nbytes, "little").hex()


def decode(text: str, width: int, where: str = "bit-vector") -> int:
    try:
        raw = bytes.fromhex(text)
    except ValueError as exc:
        raise MalformedInput(f"{where}: not a hex string ({exc})") from None
    if len(raw) != (width + 7) // 8:
        raise MalformedInput(
            f"{where}: expected {(width + 7) // 8} bytes for width {width}, got {len(raw)}"
        )
    mask = int.from_bytes(raw, "little")
    if mask >> width:
        raise MalformedInput(f"{where}: bits set beyond width {width}")
    return mask
