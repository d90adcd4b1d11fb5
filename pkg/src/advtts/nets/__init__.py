from .module import Linear, Module, Parameter, glorot
from .sru import BiSru, SruLayer, sru_cell_step, sru_layer, sru_scan
from .generator import Generator, GeneratorConfig, frame_inputs, generator_forward
from .critic import Critic, CriticConfig, critic_forward
