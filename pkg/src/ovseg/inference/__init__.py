"""Inference: semantic label maps and instance predictions from one shared
forward pass, plus the on-disk prediction record formats."""
