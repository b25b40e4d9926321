# Domain types
from .pose import Joint, Keypoint, KeypointSet, MorphologyParams, PoseMask, PoseTensor, SKELETON_EDGES, NUM_KEYPOINTS
from .dataset import Appearance, ImageRecord, PairRecord, PairSample, ToySpec
from .train_state import TrainState
