"""Multimodal human pose forecasting on motion-map heatmaps.

The package mines multimodal ground truths from a motion corpus, trains a
recurrent autoencoder with heteroscedastic uncertainty, represents the space
of future motions as a 2D heatmap backed by a latent codebook, and produces
deterministic, confidence-ranked forecasts.
"""

__version__ = "0.1.0"
