"""Amodal video instance segmentation engine.

Point prompts sampled from visible masks drive a pluggable amodal segmenter;
a point memory plus point tracking carries amodal masks through full
occlusions; image- and video-level AP metrics and a synthetic scene generator
close the loop without neural networks.
"""

__version__ = "0.1.0"
