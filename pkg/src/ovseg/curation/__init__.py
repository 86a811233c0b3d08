"""Training-data curation: prompt encoding, retrieval archives, saliency
pseudo-masks, copy-paste synthesis, augmentation, and the on-disk stores."""
