"""gelsim: batched visuotactile sensor simulation and policy learning.

Subpackages
-----------
geometry   meshes and signed distance fields
physics    sequential-impulse solver with implicit soft contacts
tactile    normal/shear force-field extraction over the sensor surface
render     depth rendering, depth->RGB look-up tables, image augmentation
envs       batched contact-rich environments (shape sensing, rolling, pegs)
learn      networks, PPO (asymmetric actor-critic), BC, DAgger, AACD
"""

__version__ = "0.1.0"
