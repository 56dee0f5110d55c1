"""EVM bytecode disassembly and the token-backing opcode heuristic."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .exceptions import SchemaError, TruncatedPushError

TRANSFER_FROM_SELECTOR = bytes.fromhex("23b872dd")

_NAMED = {
    0x00: "STOP", 0x01: "ADD", 0x02: "MUL", 0x03: "SUB", 0x04: "DIV", 0x05: "SDIV",
    0x06: "MOD", 0x07: "SMOD", 0x08: "ADDMOD", 0x09: "MULMOD", 0x0A: "EXP", 0x0B: "SIGNEXTEND",
    0x10: "LT", 0x11: "GT", 0x12: "SLT", 0x13: "SGT", 0x14: "EQ", 0x15: "ISZERO",
    0x16: "AND", 0x17: "OR", 0x18: "XOR", 0x19: "NOT", 0x1A: "BYTE", 0x1B: "SHL",
    0x1C: "SHR", 0x1D: "SAR",
    0x20: "KECCAK256",
    0x30: "ADDRESS", 0x31: "BALANCE", 0x32: "ORIGIN", 0x33: "CALLER", 0x34: "CALLVALUE",
    0x35: "CALLDATALOAD", 0x36: "CALLDATASIZE", 0x37: "CALLDATACOPY", 0x38: "CODESIZE",
    0x39: "CODECOPY", 0x3A: "GASPRICE", 0x3B: "EXTCODESIZE", 0x3C: "EXTCODECOPY",
    0x3D: "RETURNDATASIZE", 0x3E: "RETURNDATACOPY", 0x3F: "EXTCODEHASH",
    0x40: "BLOCKHASH", 0x41: "COINBASE", 0x42: "TIMESTAMP", 0x43: "NUMBER",
    0x44: "PREVRANDAO", 0x45: "GASLIMIT", 0x46: "CHAINID", 0x47: "SELFBALANCE",
    0x48: "BASEFEE", 0x49: "BLOBHASH", 0x4A: "BLOBBASEFEE",
    0x50: "POP", 0x51: "MLOAD", 0x52: "MSTORE", 0x53: "MSTORE8", 0x54: "SLOAD",
    0x55: "SSTORE", 0x56: "JUMP", 0x57: "JUMPI", 0x58: "PC", 0x59: "MSIZE", 0x5A: "GAS",
    0x5B: "JUMPDEST", 0x5C: "TLOAD", 0x5D: "TSTORE", 0x5E: "MCOPY", 0x5F: "PUSH0",
    0xA0: "LOG0", 0xA1: "LOG1", 0xA2: "LOG2", 0xA3: "LOG3", 0xA4: "LOG4",
    0xF0: "CREATE", 0xF1: "CALL", 0xF2: "CALLCODE", 0xF3: "RETURN", 0xF4: "DELEGATECALL",
    0xF5: "CREATE2", 0xFA: "STATICCALL", 0xFD: "REVERT", 0xFE: "INVALID", 0xFF: "SELFDESTRUCT",
}
OPCODES = dict(_NAMED)
for _n in range(1, 33):
    OPCODES[0x5F + _n] = f"PUSH{_n}"
for _n in range(1, 17):
    OPCODES[0x7F + _n] = f"DUP{_n}"
    OPCODES[0x8F + _n] = f"SWAP{_n}"
MNEMONICS = {name: op for op, name in OPCODES.items()}


def push_width(opcode: int) -> int:
    return opcode - 0x5F if 0x60 <= opcode <= 0x7F else 0


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    mnemonic: str
    immediate: bytes = b""

    @property
    def size(self) -> int:
        return 1 + len(self.immediate)

    def to_bytes(self) -> bytes:
        return bytes([self.opcode]) + self.immediate

    def __str__(self):
        if self.immediate:
            return f"{self.offset:#06x} {self.mnemonic} 0x{self.immediate.hex()}"
        return f"{self.offset:#06x} {self.mnemonic}"


def disassemble(code: bytes) -> list[Instruction]:
    """Linear sweep.  Undefined opcodes come back as ``INVALID`` with the raw byte kept."""
    code = bytes(code)
    out = []
    i = 0
    while i < len(code):
        op = code[i]
        width = push_width(op)
        if i + 1 + width > len(code):
            raise TruncatedPushError(i, width, len(code) - i - 1)
        out.append(Instruction(i, op, OPCODES.get(op, "INVALID"), code[i + 1:i + 1 + width]))
        i += 1 + width
    return out


def assemble(stream: Iterable[Instruction]) -> bytes:
    return b"".join(ins.to_bytes() for ins in stream)


def parse_hex(text: str) -> bytes:
    s = "".join(text.split())
    if s[:2].lower() == "0x":
        s = s[2:]
    try:
        return bytes.fromhex(s)
    except ValueError:
        raise SchemaError(f"not a hex string: {text[:40]!r}", "bytecode") from None


class Verdict(str, enum.Enum):
    TOKEN_BACKED = "DerivativeTokenBacked"
    NATIVE_BACKED = "DerivativeNativeBacked"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class TokenClassification:
    verdict: Verdict
    evidence: tuple[tuple[int, str], ...] = ()


def classify_bytecode(stream: Sequence[Instruction]) -> TokenClassification:
    """Opcode-presence heuristic for what backs a token contract.

    ``transferFrom`` selector pushed plus any CALL: backed by another token.
    CALLVALUE without that pattern: backed by the native coin.  No
    adjacency between selector and CALL is required.
    """
    selector = [(ins.offset, "PUSH4 transferFrom") for ins in stream
                if ins.mnemonic == "PUSH4" and ins.immediate == TRANSFER_FROM_SELECTOR]
    calls = [(ins.offset, "CALL") for ins in stream if ins.mnemonic == "CALL"]
    values = [(ins.offset, "CALLVALUE") for ins in stream if ins.mnemonic == "CALLVALUE"]
    if selector and calls:
        return TokenClassification(Verdict.TOKEN_BACKED, tuple(sorted(selector + calls)))
    if values:
        return TokenClassification(Verdict.NATIVE_BACKED, tuple(values))
    return TokenClassification(Verdict.UNDETERMINED)


def classify_hex(text: str) -> TokenClassification:
    return classify_bytecode(disassemble(parse_hex(text)))
