import numpy as np
import pytest

from lfdseg import runtime
from lfdseg import weights as W
from lfdseg.errors import BindError, GraphBuildError, ShapeError
from lfdseg.graph import VARIANTS, VariantConfig, build, forward
from lfdseg.tensor import Tensor


def make_input(rng, hw, n=1):
    return Tensor(rng.normal(size=(n, 3, *hw)).astype(np.float32))


class TestBuild:
    def test_full_output_shape(self):
        g = build(VariantConfig("full", (375, 1240)))
        assert g.node(g.output_id).out_shape == (2, 375, 1240)

    def test_detail_tap_dims(self):
        g = build(VariantConfig("full", (375, 1240)))
        assert g.tap_node("detail").out_shape == (64, 94, 310)

    def test_csb_input_dims(self):
        g = build(VariantConfig("csb", (375, 1240), (2, 4)))
        assert g.tap_node("csb_input").out_shape == (3, 187, 310)

    def test_context_dims(self):
        g = build(VariantConfig("full", (375, 1240), (2, 4)))
        assert g.tap_node("context").out_shape == (128, 24, 39)

    def test_unit_ratio_keeps_input_dims(self):
        g = build(VariantConfig("csb", (64, 128), (1, 1)))
        assert g.tap_node("csb_input").out_shape == (3, 64, 128)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_every_variant_builds_and_ends_in_two_channels(self, variant):
        g = build(VariantConfig(variant, (64, 128)))
        assert g.node(g.output_id).out_shape == (2, 64, 128)

    def test_unique_slot_names(self):
        for variant in VARIANTS:
            g = build(VariantConfig(variant, (64, 128)))
            names = [n for n, _ in g.weight_slots]
            assert len(names) == len(set(names)), variant

    def test_topological_order(self):
        g = build(VariantConfig("full", (64, 128)))
        seen = set()
        for node in g.nodes:
            assert all(s in seen for s in node.inputs), node.id
            seen.add(node.id)

    def test_degenerate_size_names_first_failing_layer(self):
        # vertical ratio 2 empties a 1-pixel-tall context input
        with pytest.raises(GraphBuildError, match="csb.resize"):
            build(VariantConfig("full", (1, 64)))

    def test_unknown_variant_rejected(self):
        with pytest.raises(GraphBuildError):
            VariantConfig("resnet50", (64, 128))


class TestForward:
    def test_zero_weights_zero_logits(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        out = forward(g, W.zero_store(g), make_input(rng, (48, 96)))
        assert out.dims == (1, 2, 48, 96)
        assert np.all(out.data == 0.0)

    def test_attention_tap_in_unit_interval(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        x = make_input(rng, (48, 96))
        # any weights keep the gate inside [0, 1]
        _, taps = forward(g, W.random_store(g, seed=3, scale=0.5), x, taps=("attention",))
        att = taps["attention"].data
        assert att.min() >= 0.0 and att.max() <= 1.0
        # moderate weights keep it strictly interior
        _, taps = forward(g, W.random_store(g, seed=3, scale=0.05), x, taps=("attention",))
        att = taps["attention"].data
        assert att.min() > 0.0 and att.max() < 1.0

    def test_unbound_slot_named(self, rng):
        g = build(VariantConfig("sdb", (48, 96)))
        store = W.random_store(g, seed=0)
        partial = W.WeightStore()
        for name in store.names():
            if name != "head.out.bias":
                partial.add(name, store.get(name))
        with pytest.raises(BindError, match="head.out.bias"):
            forward(g, partial, make_input(rng, (48, 96)))

    def test_dim_mismatch_named(self, rng):
        g = build(VariantConfig("sdb", (48, 96)))
        store = W.random_store(g, seed=0)
        bad = W.WeightStore()
        for name in store.names():
            arr = store.get(name)
            bad.add(name, arr.reshape(-1)[: arr.size] if name != "head.out.weight"
                    else np.zeros((3, 128, 1, 1), np.float32))
        with pytest.raises(BindError, match="head.out.weight"):
            forward(g, bad, make_input(rng, (48, 96)))

    def test_wrong_input_size_rejected(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        with pytest.raises(ShapeError):
            forward(g, W.random_store(g), make_input(rng, (96, 48)))

    def test_batch_forward_matches_per_image(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        store = W.random_store(g, seed=9)
        x = make_input(rng, (48, 96), n=2)
        batched = forward(g, store, x).data
        one = forward(g, store, Tensor(x.data[:1])).data
        two = forward(g, store, Tensor(x.data[1:])).data
        assert np.allclose(batched, np.concatenate([one, two]), atol=1e-5)

    def test_attention_saturation_matches_add_variant(self, rng):
        # forcing the gate to 1 turns the fused feature into plain addition
        full = build(VariantConfig("full", (48, 96)))
        addv = build(VariantConfig("add", (48, 96)))
        store = W.random_store(full, seed=21)
        x = make_input(rng, (48, 96))
        att_shape = full.tap_node("attention").out_shape
        ones = Tensor(np.ones((1, *att_shape), np.float32))
        _, taps_full = forward(full, store, x, taps=("fused",),
                               overrides={full.taps["attention"]: ones})
        add_store = W.WeightStore()
        add_slots = {name for name, _ in addv.weight_slots}
        for name in store.names():
            if name in add_slots:
                add_store.add(name, store.get(name))
        _, taps_add = forward(addv, add_store, x, taps=("fused",))
        diff = np.abs(taps_full["fused"].data - taps_add["fused"].data).max()
        assert diff <= 1e-6

    def test_forward_thread_invariant(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        store = W.random_store(g, seed=4)
        x = make_input(rng, (48, 96))
        runtime.set_threads(1)
        base = forward(g, store, x).data
        for n in (2, 4, 8):
            runtime.set_threads(n)
            assert np.array_equal(forward(g, store, x).data, base)

    def test_unknown_tap_rejected(self, rng):
        g = build(VariantConfig("full", (48, 96)))
        with pytest.raises(GraphBuildError, match="tap"):
            forward(g, W.random_store(g), make_input(rng, (48, 96)), taps=("nonsense",))
