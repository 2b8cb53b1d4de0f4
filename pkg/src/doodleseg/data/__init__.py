from .records import (SampleRecord, ManifestEntry, DatasetManifest, DatasetError,
                      write_dataset, load_dataset, load_record,
                      save_manifest, load_manifest)
from .preprocess import (crop_to_mask, resize_and_gray, equalize_histogram,
                         preprocess_record, encode_and_normalize, encode_arrays,
                         doodle_class_value, EmptyMaskError)
from .sampling import (random_oversample, split_and_fold,
                       EmptyClassError, TooFewSamplesError)
from .synthetic import (CLASS_NAMES, Scene, generate_scene, generate_record,
                        generate_synthetic, doodle_pixel_value, PlacementError)
