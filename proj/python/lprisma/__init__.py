"""L-PRISMA pre-screening pipeline bindings."""

try:
    from ._lprisma import *  # noqa: F401,F403  (installed package layout)
    from ._lprisma import __version__  # noqa: F401
except ImportError:  # in-tree build: extension sits next to the package on sys.path
    from _lprisma import *  # noqa: F401,F403
    from _lprisma import __version__  # noqa: F401
