# Test package initialization
#
# Note: shared graph builders are fixtures in conftest.py. Slow synthetic
# runs are marked 'slow' and can be deselected with -m "not slow".
