import xml.etree.ElementTree as ET

import numpy as np
import pytest

from modrl.network import init_network
from modrl.render import RenderStyle, render


def small_net(seed=0):
    net = init_network([3, 4, 2], seed)
    return net


class TestSVG:
    def test_well_formed_xml(self):
        data = render(small_net(), fmt="svg")
        root = ET.fromstring(data.decode())
        assert root.tag.endswith("svg")

    def test_byte_identical_reruns(self):
        net = small_net(1)
        part = {n: 0 for n in net.neuron_ids()}
        a = render(net, part, fmt="svg")
        b = render(net, part, fmt="svg")
        assert a == b

    def test_two_communities_use_two_colours(self):
        net = small_net(2)
        part = {n: (0 if n[1] % 2 == 0 else 1) for n in net.neuron_ids()}
        root = ET.fromstring(render(net, part, fmt="svg").decode())
        ns = "{http://www.w3.org/2000/svg}"
        fills = {c.get("fill") for c in root.iter(f"{ns}circle")}
        style = RenderStyle()
        assert fills == {style.palette[0], style.palette[1]}

    def test_fully_masked_net_draws_nodes_only(self):
        net = small_net(3)
        for m in net.weight_masks:
            m[...] = False
        net.apply_masks()
        root = ET.fromstring(render(net, fmt="svg").decode())
        ns = "{http://www.w3.org/2000/svg}"
        assert len(list(root.iter(f"{ns}line"))) == 0
        assert len(list(root.iter(f"{ns}circle"))) == sum(net.layer_sizes)

    def test_edge_count_and_width_scale(self):
        net = small_net(4)
        root = ET.fromstring(render(net, fmt="svg").decode())
        ns = "{http://www.w3.org/2000/svg}"
        lines = list(root.iter(f"{ns}line"))
        assert len(lines) == 3 * 4 + 4 * 2
        widths = [float(l.get("stroke-width")) for l in lines]
        weights = np.concatenate([np.abs(w).ravel() for w in net.weights])
        assert max(widths) == pytest.approx(2.0 * weights.max(), abs=1e-3)

    def test_labels_rendered_when_toggled(self):
        style = RenderStyle(label_inputs=True, label_outputs=True)
        data = render(small_net(), style=style, fmt="svg",
                      input_labels=["a", "b", "c"], output_labels=["x", "y"])
        root = ET.fromstring(data.decode())
        ns = "{http://www.w3.org/2000/svg}"
        texts = [t.text for t in root.iter(f"{ns}text")]
        assert texts == ["a", "b", "c", "x", "y"]

    def test_network_not_mutated(self):
        net = small_net(5)
        snapshot = [w.copy() for w in net.weights]
        coords = [x.copy() for x in net.x_coords]
        render(net, {n: 0 for n in net.neuron_ids()}, fmt="svg")
        for a, b in zip(snapshot, net.weights):
            assert np.array_equal(a, b)
        for a, b in zip(coords, net.x_coords):
            assert np.array_equal(a, b)


class TestDOT:
    def test_structure_parses(self):
        text = render(small_net(), fmt="dot").decode()
        assert text.startswith("graph network {")
        assert text.rstrip().endswith("}")
        assert text.count("{") == text.count("}")
        assert '"0:0" -- "1:0"' in text or '"0:0" -- "1:1"' in text
        assert 'pos="' in text and '!"' in text

    def test_byte_identical(self):
        assert render(small_net(6), fmt="dot") == render(small_net(6), fmt="dot")


class TestErrors:
    def test_unsupported_format_rejected(self):
        with pytest.raises(ValueError):
            render(small_net(), fmt="png")

    def test_bad_style_rejected(self):
        with pytest.raises(ValueError):
            render(small_net(), style=RenderStyle(line_width_scale=0.0))
