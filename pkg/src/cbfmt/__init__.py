"""Cyclic block filtered multitone: transceiver, orthogonality, pulse design and link simulation."""

from .filterbank import FilterBankParams, PrototypePulse, SymbolBlock

__all__ = ["FilterBankParams", "PrototypePulse", "SymbolBlock"]
