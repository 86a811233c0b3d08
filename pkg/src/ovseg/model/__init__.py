"""The dual-head segmenter: dense visual features, frozen text bank, semantic
projection into text space, and a query decoder emitting mask proposals behind
a gradient-blocking boundary."""
