from .index import DatasetIndex, read_annotations, read_index, write_annotations, write_index
from .loader import PairDataset, PairLoader, ScheduleBatchSampler, image_to_tensor, tensor_to_image
from .pairs import build_pairs, sample_test_pairs, split_by_identity
from .toy import TOY_PALETTE, make_toy_dataset
