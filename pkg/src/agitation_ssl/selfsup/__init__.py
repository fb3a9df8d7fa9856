from .autoencoders import ENCODER_SPECS, Autoencoder, EncoderSpec, build_autoencoder, shape_trace, train_autoencoder
from .transform import (FrozenFeatureExtractor, TransformationClassifier, TransformationDataset,
                        build_transformation_classifier, build_transformation_dataset, extract_features,
                        extract_frozen, split_by_source, train_transformation_classifier)
