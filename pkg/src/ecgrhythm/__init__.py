"""Four-class single-lead ECG rhythm classification (N, A, O, ~).

Signal-quality gating, QRS-anchored spectrogram classification with a
row-wise batch-normalized DenseNet, and an abstaining AdaBoost
post-classifier for ambiguous N/O calls.
"""

__version__ = "0.1.0"
