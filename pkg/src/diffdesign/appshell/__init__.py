"""Application shell: checkpoint bundles, CLI, HTTP service, experiment drivers."""
