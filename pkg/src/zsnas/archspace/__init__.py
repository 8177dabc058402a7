from .cell import (
    EDGES,
    OPS,
    SPACE_SIZE,
    ArchParseError,
    CellSpec,
    OpKind,
    enumerate_space,
    parse_arch,
    serialize,
)
from .counting import conv_macs, conv_params, count_flops, count_params
from .macro import MacroConfig, Stage
from .network import Context, Network, Param, Trace, instantiate
from .topology import CellTopology, cell_topology, network_topologies, nn_degree, nn_mass

__all__ = [
    "EDGES", "OPS", "SPACE_SIZE", "ArchParseError", "CellSpec", "CellTopology", "Context",
    "MacroConfig", "Network", "OpKind", "Param", "Stage", "Trace", "cell_topology", "conv_macs",
    "conv_params", "count_flops", "count_params", "enumerate_space", "instantiate",
    "network_topologies", "nn_degree", "nn_mass", "parse_arch", "serialize",
]
