"""Open-vocabulary semantic + instance segmentation from retrieval-curated pseudo-labels.

The pipeline: curate per-category image archives from an unlabelled index
dataset by text-to-image embedding retrieval, turn saliency masks into
instance pseudo-labels, synthesize multi-object training images by
copy-paste, train a dual-head segmenter (per-pixel text-space classifier +
query-decoder mask proposals behind a stop-gradient), and run joint
semantic/instance inference with mask NMS.
"""

__version__ = "0.1.0"
