"""Flow-matching and DDIM generative models for action prediction on
Euclidean space and the SO(2)/SO(3) manifolds, with desk-scale
imitation-learning experiments."""

__version__ = "0.1.0"
