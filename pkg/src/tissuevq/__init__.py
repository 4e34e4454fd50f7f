"""Vector-quantized tissue-image modeling toolkit.

Pipeline stages: synthetic stratified-tissue dataset generation, a
vector-quantized adversarial image autoencoder, a flat-latent feature
autoencoder on top of its features, a WordPiece-tokenized caption
transformer over code-index sequences, concept-vector latent exploration,
and evaluation/report tooling. Everything is reachable from the
``tissuevq`` CLI and the HTTP inference service.
"""

__version__ = "0.1.0"
