# Pose guided person generation
__version__ = "1.0.0"
