"""Hashed bag-of-tokens features for the VCCFinder-style linear model."""

from __future__ import annotations

import re
from collections.abc import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.feature_extraction.text import HashingVectorizer

TOKEN_PATTERN = r"(?u)[^\W_]+"
_TOKEN_RE = re.compile(TOKEN_PATTERN)


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def vectorizer(hash_bits: int = 18) -> HashingVectorizer:
    return HashingVectorizer(
        n_features=2**hash_bits,
        token_pattern=TOKEN_PATTERN,
        lowercase=True,
        alternate_sign=True,
        norm=None,
    )


def document(message: str, code_change: Iterable[str] = ()) -> str:
    return "\n".join([message, *code_change])


def tokenize_for_vcc(message: str, code_change: Iterable[str] = (), hash_bits: int = 18) -> sp.csr_matrix:
    """One hashed row (1 x 2**hash_bits) for a message and optional changed lines."""
    return vectorizer(hash_bits).transform([document(message, code_change)]).tocsr()


def design_matrix(texts: Sequence[str], Z: np.ndarray, hash_bits: int) -> sp.csr_matrix:
    """Hashed text columns followed by the normalised expert features."""
    hashed = vectorizer(hash_bits).transform(list(texts))
    return sp.hstack([hashed, sp.csr_matrix(Z)], format="csr")
