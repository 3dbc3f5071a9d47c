"""Hate/offensive tweet classification toolkit for Hindi and Hinglish.

Pipeline pieces: deterministic tweet normalization, CBOW/skip-gram word
vector pretraining, a convolutional classifier with fine-tuned embeddings,
bag-of-words baselines, and a confusion-matrix evaluation suite.
"""

__version__ = "0.1.0"
