import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from toys import micro_macro

from zsnas.archspace import (
    EDGES,
    OPS,
    SPACE_SIZE,
    ArchParseError,
    CellSpec,
    CellTopology,
    MacroConfig,
    OpKind,
    Stage,
    cell_topology,
    conv_macs,
    conv_params,
    count_flops,
    count_params,
    enumerate_space,
    instantiate,
    network_topologies,
    nn_degree,
    nn_mass,
    parse_arch,
    serialize,
)
from zsnas.archspace.network import Context, Trace
from zsnas.tensor_core import RngState, Tensor

ALL_NONE = "|none~0|+|none~0|none~1|+|none~0|none~1|none~2|"
specs = st.integers(0, SPACE_SIZE - 1).map(CellSpec.from_index)


def test_op_set():
    assert [o.value for o in OpKind] == ["none", "skip_connect", "conv_1x1", "conv_3x3", "avg_pool_3x3"]
    assert len(EDGES) == 6 and all(s < t for t, s in EDGES)


def test_parse_example():
    spec = parse_arch("|skip_connect~0|+|none~0|none~1|+|none~0|none~1|skip_connect~2|")
    assert spec.count(OpKind.SKIP) == 2 and spec.count(OpKind.NONE) == 4
    assert spec.edge(1, 0) is OpKind.SKIP and spec.edge(3, 2) is OpKind.SKIP


def test_round_trip_whole_space():
    seen = set()
    for i, spec in enumerate(enumerate_space()):
        s = serialize(spec)
        assert parse_arch(s) == spec and serialize(parse_arch(s)) == s
        assert spec.index == i and CellSpec.from_index(i) == spec
        seen.add(s)
    assert len(seen) == SPACE_SIZE == 5 ** 6


def test_enumeration_order():
    first = next(enumerate_space())
    assert str(first) == ALL_NONE
    specs_ = list(enumerate_space())
    assert specs_[1].ops[-1] is OPS[1] and all(o is OpKind.NONE for o in specs_[1].ops[:-1])


@pytest.mark.parametrize("text,offset", [
    ("|bad_op~0|+|none~0|none~1|+|none~0|none~1|none~2|", 1),
    ("|none~0|+|none~0|+|none~0|none~1|none~2|", 9),
    ("|none~0|+|none~0|none~1|+|none~0|none~1|", 25),
    ("none~0|+|none~0|none~1|+|none~0|none~1|none~2|", 0),
    ("|none~1|+|none~0|none~1|+|none~0|none~1|none~2|", 6),
    ("|none~0|+|none~0|none~1|+|none~0|none~1|none~2|+|none~0|", 47),
])
def test_parse_errors_carry_offsets(text, offset):
    with pytest.raises(ArchParseError) as err:
        parse_arch(text)
    assert err.value.offset == offset


def test_all_none_network_is_finite():
    net = instantiate(parse_arch(ALL_NONE), micro_macro(), RngState(0))
    x = RngState(1).normal((2, *net.input_shape))
    out = net(Tensor(x))
    assert out.shape == (2, 3) and np.all(np.isfinite(out.data))


def test_instantiate_is_deterministic():
    a = instantiate(CellSpec.from_index(4321), micro_macro(), RngState(3))
    b = instantiate(CellSpec.from_index(4321), micro_macro(), RngState(3))
    assert all(np.array_equal(x, y) for x, y in zip(a.snapshot(), b.snapshot()))


def test_resolution_too_small():
    with pytest.raises(ValueError, match="resolution"):
        instantiate(CellSpec.from_index(0), MacroConfig(input_resolution=6))


def test_count_params_closed_forms():
    assert conv_params(3, 8, 1) == 40
    none = parse_arch(ALL_NONE)
    one = CellSpec((OpKind.CONV1,) + (OpKind.NONE,) * 5)
    m = MacroConfig()
    per_cell = conv_params(16, 16, 1) + 0
    widths = [16] * 5 + [32] * 5 + [64] * 5
    assert count_params(one, m) - count_params(none, m) == sum(conv_params(w, w, 1) for w in widths)
    assert per_cell == 16 * 16 + 32


def test_count_flops_closed_forms():
    assert conv_macs(16, 16, 3, 32, 32) == 2_359_296
    m = MacroConfig(stages=((1, 16),))
    none = parse_arch(ALL_NONE)
    assert count_flops(none, m) == conv_macs(3, 16, 3, 32, 32) + 16 * 10
    one = CellSpec((OpKind.CONV3,) + (OpKind.NONE,) * 5)
    assert count_flops(one, m) - count_flops(none, m) == 2_359_296


@settings(max_examples=100, deadline=None)
@given(specs, st.sampled_from(["resblock", "pool_conv"]), st.integers(1, 2), st.integers(1, 3))
def test_counts_match_instantiation(spec, reduction, cells, stages):
    macro = micro_macro(width=3, cells=cells, stages=stages, resolution=8, reduction=reduction)
    net = instantiate(spec, macro, RngState(0))
    assert net.num_params == count_params(spec, macro)
    assert net.depth == len([p for p in net.params() if p.is_weight])
    trace = Trace()
    net(Tensor(np.zeros((1, *macro.input_shape))), Context(trace=trace))
    assert trace.macs == count_flops(spec, macro)


@settings(max_examples=50, deadline=None)
@given(specs, st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_widening_never_decreases_flops(spec, a, b, c):
    base = MacroConfig(stem_channels=a, stages=((1, a), (1, a + b), (1, a + b + c)))
    wide = MacroConfig(stem_channels=a + 1, stages=((1, a + 1), (1, a + b + 1), (1, a + b + c + 1)))
    assert count_flops(spec, wide) >= count_flops(spec, base)


def test_nn_mass_examples():
    assert nn_mass([CellTopology(16, 3, 0, 6, 64)] * 4) == 0.0
    assert nn_mass([CellTopology(64, 5, 6, 6, 448)]) == 320.0
    two = [CellTopology(32, 4, 3, 6, 128), CellTopology(64, 8, 2, 8, 256)]
    assert nn_mass(two) == 192.0
    with pytest.raises(ValueError):
        nn_mass([CellTopology(8, 1, 7, 6, 8)])
    flags = []
    assert nn_mass([CellTopology(8, 1, 0, 0, 8)], flags) == 0.0 and flags


def test_nn_degree_examples():
    assert nn_degree([CellTopology(16, 2, 0, 6, 32), CellTopology(32, 2, 0, 6, 64)]) == 48.0
    assert nn_degree([CellTopology(16, 3, 8, 8, 32)]) == 16.25
    a, b = [CellTopology(16, 3, 2, 6, 48)], [CellTopology(32, 1, 5, 6, 96)]
    assert nn_degree(a + b) == nn_degree(a) + nn_degree(b)
    with pytest.raises(ValueError):
        nn_degree([CellTopology(16, 0, 0, 6, 0)])


def test_all_none_nn_mass_is_zero():
    assert nn_mass(network_topologies(parse_arch(ALL_NONE))) == 0.0


@settings(max_examples=100, deadline=None)
@given(specs, st.integers(0, 5))
def test_nn_mass_monotone_in_skips(spec, edge):
    # turning a none edge into a skip edge adds a skip and nothing else
    if spec.ops[edge] is not OpKind.NONE:
        return
    ops = list(spec.ops)
    ops[edge] = OpKind.SKIP
    more = CellSpec(tuple(ops))
    assert cell_topology(more, 16).skips == cell_topology(spec, 16).skips + 1
    assert nn_mass(network_topologies(more)) >= nn_mass(network_topologies(spec))


def test_topology_density_bounds():
    for spec in list(enumerate_space())[::97]:
        t = cell_topology(spec, 8)
        assert 0 <= t.skips <= t.possible_skips and 0.0 <= t.density <= 1.0


def test_macro_config_round_trip():
    m = MacroConfig(stem_channels=8, stages=(Stage(2, 8), Stage(1, 16)), reduction="pool_conv")
    assert MacroConfig.from_dict(m.to_dict()) == m
    with pytest.raises(ValueError):
        MacroConfig.from_dict({"bogus": 1})
    with pytest.raises(ValueError):
        MacroConfig(stages=((0, 4),))
