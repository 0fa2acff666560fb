"""solcat: a decentralized manager for runnable scientific solutions.

A solution is a versioned, self-describing unit: one ``solution.json``
manifest bundling metadata, an argument schema, an environment
specification, and lifecycle hook commands. Catalogs collect solutions
(plain directories or git repositories) and are synced into a local,
checksummed cache. A local collection tracks installed solutions and run
history; the lifecycle layer installs, tests, runs, and uninstalls
solutions in per-solution isolated environments; the deploy layer
publishes solutions into catalogs and mints content-addressed DOIs
through a deposit stub. A loopback HTTP service exposes everything as
asynchronous tasks for the web UI and other clients.
"""

__version__ = "0.1.0"

API_VERSION = "1.0.0"
