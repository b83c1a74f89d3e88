from .counterexamples import *  # noqa: F401,F403
from .instances import *  # noqa: F401,F403
