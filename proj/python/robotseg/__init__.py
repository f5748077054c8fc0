from ._robotseg import *  # noqa: F401,F403
