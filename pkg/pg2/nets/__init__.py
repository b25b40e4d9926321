from .blocks import ResidualBlock, ResidualDecoder, ResidualEncoder, count_parameters, init_weights
from .discriminator import PairDiscriminator, build_discriminator
from .generators import PoseGenerator, RefinementGenerator, build_g1, build_g2, combine_difference
