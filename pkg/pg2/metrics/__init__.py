from .inception import inception_score, mask_is
from .oracles import ClassifierOracle, ConstantOracle, InceptionOracle, PaletteOracle, UniformOracle, build_oracle
from .ssim import apply_mask, mask_ssim, ssim, ssim_components
