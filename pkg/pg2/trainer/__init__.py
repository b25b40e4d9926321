from .checkpoint import load_checkpoint, save_checkpoint
from .inference import generate
from .loss_log import LossLog
from .stages import train_one_stage, train_stage1, train_stage2, variant_name
from .state import init_state
