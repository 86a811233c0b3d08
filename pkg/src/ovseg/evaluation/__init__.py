"""Evaluation: mIoU for semantic maps and COCO-style mask AP for instances."""
