"""Training: bipartite-matched mask losses, semantic cross-entropy, and the
optimization loop."""
