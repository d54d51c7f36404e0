"""Zero-day intrusion detection on imbalanced NetFlow data.

Rare attack categories are withheld from training and only appear in the
test set. Five from-scratch classifiers are trained behind a common
preprocessing chain (standardization, correlation pruning, PCA, SMOTE) and
scored on detection metrics and wall-clock time.
"""

__version__ = "0.1.0"
