"""Procedural light fields for desk-scale training and evaluation.

A scene is a textured background plane plus a few textured foreground
shapes, each at its own disparity. View (u, v) samples layer point
(x + d*du, y + d*dv) with du, dv the offsets from the central view, so the
angular u axis pairs with x and v with y. Nearer layers occlude farther
ones; one layer carries a soft highlight that moves faster than its texture,
a mild view-dependent term. Rendering is supersampled and box-filtered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .lightfield import ColorTag, LightField


@dataclass
class Texture:
    freqs: np.ndarray  # (K, 2) cycles per HR pixel, (fx, fy)
    phases: np.ndarray  # (K,)
    amps: np.ndarray  # (K,)
    edge_gain: float  # > 0 sharpens the first component into stripes
    color: np.ndarray  # (3,) base RGB

    def __call__(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        acc = np.zeros(X.shape)
        for k, ((fx, fy), ph, amp) in enumerate(zip(self.freqs, self.phases, self.amps)):
            s = np.sin(2 * np.pi * (fx * X + fy * Y) + ph)
            if k == 0 and self.edge_gain > 0:
                s = np.tanh(self.edge_gain * s)
            acc += amp * s
        return 0.5 + 0.5 * acc / max(float(np.sum(self.amps)), 1e-9)


@dataclass
class Layer:
    disparity: float
    texture: Texture
    shape: str = "plane"  # plane | disc | rect
    center: Tuple[float, float] = (0.0, 0.0)
    size: Tuple[float, float] = (0.0, 0.0)
    highlight: float = 0.0

    def mask(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        cx, cy = self.center
        if self.shape == "plane":
            return np.ones(X.shape, bool)
        if self.shape == "disc":
            return (X - cx) ** 2 + (Y - cy) ** 2 <= self.size[0] ** 2
        return (np.abs(X - cx) <= self.size[0]) & (np.abs(Y - cy) <= self.size[1])


@dataclass
class Scene:
    layers: List[Layer] = field(default_factory=list)  # back to front


def _random_texture(rng: np.random.Generator) -> Texture:
    K = int(rng.integers(2, 5))
    mags = rng.uniform(0.03, 0.33, K)
    angles = rng.uniform(0, np.pi, K)
    freqs = np.stack([mags * np.cos(angles), mags * np.sin(angles)], axis=1)
    return Texture(
        freqs=freqs,
        phases=rng.uniform(0, 2 * np.pi, K),
        amps=rng.uniform(0.3, 1.0, K),
        edge_gain=float(rng.choice([0.0, 3.0, 8.0])),
        color=rng.uniform(0.2, 0.9, 3),
    )


def random_scene(rng: np.random.Generator, H: int, W: int) -> Scene:
    bg = Layer(float(rng.uniform(-0.6, 0.2)), _random_texture(rng))
    layers = [bg]
    for _ in range(int(rng.integers(1, 4))):
        shape = str(rng.choice(["disc", "rect"]))
        layers.append(
            Layer(
                disparity=float(rng.uniform(bg.disparity + 0.3, 1.2)),
                texture=_random_texture(rng),
                shape=shape,
                center=(float(rng.uniform(0.2, 0.8) * W), float(rng.uniform(0.2, 0.8) * H)),
                size=(float(rng.uniform(0.1, 0.3) * W), float(rng.uniform(0.1, 0.3) * H)),
            )
        )
    # draw back to front by disparity
    layers.sort(key=lambda layer: layer.disparity)
    layers[int(rng.integers(0, len(layers)))].highlight = float(rng.uniform(0.05, 0.15))
    return Scene(layers)


def render(scene: Scene, U: int = 5, V: int = 5, H: int = 96, W: int = 96, supersample: int = 2) -> LightField:
    """Render an RGB light field (U, V, 3, H, W) in [0, 1]."""
    ss = supersample
    ys = (np.arange(H * ss) + 0.5) / ss - 0.5
    xs = (np.arange(W * ss) + 0.5) / ss - 0.5
    Yg, Xg = np.meshgrid(ys, xs, indexing="ij")
    out = np.empty((U, V, 3, H, W), np.float32)
    for u in range(U):
        for v in range(V):
            du, dv = u - (U - 1) / 2.0, v - (V - 1) / 2.0
            img = np.zeros((3,) + Xg.shape)
            for layer in scene.layers:
                X, Y = Xg + layer.disparity * du, Yg + layer.disparity * dv
                m = layer.mask(X, Y)
                t = layer.texture(X, Y)
                rgb = layer.texture.color[:, None, None] * (0.35 + 0.65 * t)
                if layer.highlight:
                    # the highlight shifts opposite to the texture: view-dependent shading
                    cx, cy = layer.center if layer.shape != "plane" else (W / 2.0, H / 2.0)
                    hx, hy = cx + layer.disparity * du, cy + layer.disparity * dv
                    r2 = (Xg - hx) ** 2 + (Yg - hy) ** 2
                    rgb = rgb + layer.highlight * np.exp(-r2 / (2 * (0.12 * W) ** 2))
                img = np.where(m, rgb, img)
            img = img.reshape(3, H, ss, W, ss).mean(axis=(2, 4))
            out[u, v] = np.clip(img, 0.0, 1.0)
    return LightField(out, ColorTag.RGB)


def synthetic_light_field(seed: int, U: int = 5, V: int = 5, H: int = 96, W: int = 96) -> LightField:
    return render(random_scene(np.random.default_rng(seed), H, W), U, V, H, W)


def synthetic_dataset(n: int, seed: int = 0, U: int = 5, V: int = 5, H: int = 96, W: int = 96) -> List[LightField]:
    """``n`` independent scenes; scene i depends only on (seed, i)."""
    seeds = np.random.SeedSequence(seed).spawn(n)
    return [synthetic_light_field(int(s.generate_state(1)[0]), U, V, H, W) for s in seeds]
