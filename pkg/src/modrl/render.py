"""Deterministic SVG / DOT rendering of spatially embedded networks.

Neurons are drawn at (x-coordinate, layer), inputs at the bottom. Unmasked
weights are line segments with width proportional to |w| and colour by
sign; an optional partition colours the nodes by community. Identical
inputs produce byte-identical output.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .graphs import Partition
from .network import SpatialMLP

TAB10 = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


@dataclass
class RenderStyle:
    width: int = 900
    height: int = 620
    margin: float = 70.0
    node_radius: float = 6.0
    line_width_scale: float = 2.0          # stroke width per unit |w|
    positive_color: str = "#3572b0"
    negative_color: str = "#c0392b"
    palette: tuple[str, ...] = TAB10
    node_color: str = "#333333"
    masked_color: str = "#dddddd"
    background: str = "#ffffff"
    label_inputs: bool = False
    label_outputs: bool = False
    font_size: int = 11

    def validate(self) -> None:
        if self.line_width_scale <= 0:
            raise ValueError("line_width_scale must be > 0")
        if not self.palette:
            raise ValueError("palette must not be empty")


def _positions(net: SpatialMLP, style: RenderStyle):
    """Pixel position of every neuron; layer 0 at the bottom edge."""
    n_layers = len(net.layer_sizes)
    w = style.width - 2 * style.margin
    h = style.height - 2 * style.margin
    pos = {}
    for l, xs in enumerate(net.x_coords):
        y = style.height - style.margin - (h * l / max(n_layers - 1, 1))
        for i, x in enumerate(xs):
            pos[(l, i)] = (style.margin + float(x) * w, y)
    return pos


def _node_fill(nid, net, partition, style):
    l, i = nid
    if not net.neuron_masks[l][i]:
        return style.masked_color
    if partition is not None and nid in partition:
        return style.palette[partition[nid] % len(style.palette)]
    return style.node_color


def _render_svg(net, partition, style, input_labels, output_labels,
                annotation) -> str:
    pos = _positions(net, style)
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    if annotation:
        out.append(f'<!-- {escape(annotation)} -->')
    out += [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" '
        f'height="{style.height}" viewBox="0 0 {style.width} {style.height}">',
        f'<rect width="{style.width}" height="{style.height}" '
        f'fill="{style.background}"/>',
        '<g stroke-linecap="round">',
    ]
    for l in range(net.n_weight_layers):
        w = net.effective_weights(l)
        rows, cols = np.nonzero(w)
        for i, j in zip(rows, cols):
            value = float(w[i, j])
            x1, y1 = pos[(l, int(i))]
            x2, y2 = pos[(l + 1, int(j))]
            color = style.positive_color if value > 0 else style.negative_color
            width = style.line_width_scale * abs(value)
            out.append(
                f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                f'stroke="{color}" stroke-width="{width:.3f}"/>')
    out.append('</g>')
    for l in range(len(net.layer_sizes)):
        for i in range(net.layer_sizes[l]):
            x, y = pos[(l, i)]
            fill = _node_fill((l, i), net, partition, style)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" '
                       f'r="{style.node_radius}" fill="{fill}"/>')
    if style.label_inputs:
        labels = input_labels or [f"in{i}" for i in range(net.layer_sizes[0])]
        for i, name in enumerate(labels[: net.layer_sizes[0]]):
            x, y = pos[(0, i)]
            out.append(
                f'<text x="{x:.2f}" y="{y + 3 * style.node_radius:.2f}" '
                f'font-size="{style.font_size}" text-anchor="middle" '
                f'font-family="sans-serif">{escape(name)}</text>')
    if style.label_outputs:
        top = len(net.layer_sizes) - 1
        labels = output_labels or [f"out{i}" for i in range(net.layer_sizes[top])]
        for i, name in enumerate(labels[: net.layer_sizes[top]]):
            x, y = pos[(top, i)]
            out.append(
                f'<text x="{x:.2f}" y="{y - 2 * style.node_radius:.2f}" '
                f'font-size="{style.font_size}" text-anchor="middle" '
                f'font-family="sans-serif">{escape(name)}</text>')
    out.append('</svg>')
    return "\n".join(out) + "\n"


def _render_dot(net, partition, style, annotation) -> str:
    pos = _positions(net, style)
    scale = 1.0 / 72.0  # px to inches for fixed graphviz positions
    out = []
    if annotation:
        out.append(f"// {annotation}")
    out += [
        'graph network {',
        '  layout=neato;',
        '  node [shape=circle, fixedsize=true, width=0.22, style=filled, '
        'label=""];',
    ]
    for l in range(len(net.layer_sizes)):
        for i in range(net.layer_sizes[l]):
            x, y = pos[(l, i)]
            fill = _node_fill((l, i), net, partition, style)
            out.append(
                f'  "{l}:{i}" [pos="{x * scale:.4f},'
                f'{(style.height - y) * scale:.4f}!", fillcolor="{fill}"];')
    for l in range(net.n_weight_layers):
        w = net.effective_weights(l)
        rows, cols = np.nonzero(w)
        for i, j in zip(rows, cols):
            value = float(w[i, j])
            color = style.positive_color if value > 0 else style.negative_color
            width = style.line_width_scale * abs(value)
            out.append(f'  "{l}:{int(i)}" -- "{l + 1}:{int(j)}" '
                       f'[penwidth={width:.3f}, color="{color}"];')
    out.append('}')
    return "\n".join(out) + "\n"


def render(net: SpatialMLP, partition: Partition | None = None,
           style: RenderStyle | None = None, fmt: str = "svg",
           input_labels: list[str] | None = None,
           output_labels: list[str] | None = None,
           annotation: str = "") -> bytes:
    """Render the network to SVG or DOT bytes. Never mutates the network.

    ``annotation`` is embedded as a comment (provenance hashes and the
    like); identical inputs still produce byte-identical output.
    """
    style = style or RenderStyle()
    style.validate()
    if fmt == "svg":
        text = _render_svg(net, partition, style, input_labels, output_labels,
                           annotation)
    elif fmt == "dot":
        text = _render_dot(net, partition, style, annotation)
    else:
        raise ValueError(f"unsupported render format {fmt!r}")
    return text.encode("utf-8")
