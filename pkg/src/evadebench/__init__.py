"""Black-box adversarial robustness harness for offensive language
classifiers: embedding-guided word substitution attacks, baseline
perturbations, shielding defenses, and accuracy-drop evaluation."""

from .text_core import Document, Label, Token, detokenize, tokenize

__all__ = ["Document", "Label", "Token", "detokenize", "tokenize"]
