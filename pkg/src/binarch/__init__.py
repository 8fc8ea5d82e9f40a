"""Architecture search by direct binary-weight optimization.

Subpackages: binarize (logistic relaxation), model (two-layer classifier),
optim (relaxed and real SGD), strategies (the ten training variants), data
(MNIST/Citeseer ingestion), spectral (Laplacian signatures), diagnostics
(convergence-theory checks), cli (experiment runner).
"""

__version__ = "0.1.0"
