"""meshloop: mesh-aligned feedback refinement for articulated toy bodies.

Submodules
----------
rotations    quaternion / matrix / axis-angle / 6D math, swing-twist split
kinematics   kinematic trees, shape blending, FK, skinning, downsampling
toybody      procedural toy body / hand / full-body model generators
camera       weak-perspective and pinhole projection
sampling     feature pyramids, grid and mesh-aligned point sampling
feedback     trainable iterative refinement loop (attention + MLP, numpy)
raster       z-buffered software rasterizer for dense correspondence maps
integration  wrist copy-paste and twist-compensated part integration
metrics      MPJPE / PVE / Procrustes alignment / OKS
assets       self-describing text documents for models, weights, results
scenarios    seeded synthetic fitting scenarios for training and tests
cli          command line entry points
"""

__version__ = "0.1.0"
